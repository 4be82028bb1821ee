"""End-to-end runs: data, teacher, teacher-guided GAN, hybrid data, student.

Every phase draws its randomness from ``phase_seed(master_seed, name)``
so any single phase can be rerun from the configuration and the
checkpoints of earlier phases.
"""
from __future__ import annotations

import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import data as D
from .config import ExperimentConfig, phase_seeds
from .distillation import evaluate, train_classifier, train_student, tvd_report
from .generation import (GanResult, class_histogram, entropy, generate_synthetic,
                         teacher_agreement, train_gan)
from .models import Classifier, load_checkpoint, parameter_digest, save_checkpoint


class MetricsLog:
    """Append-only JSON-lines writer."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def __call__(self, row: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(row) + "\n")


@dataclass
class RunData:
    train: D.Dataset
    test: D.Dataset
    collected: D.Dataset


class Run:
    """Output directory layout and bookkeeping for one master seed."""

    def __init__(self, config: ExperimentConfig, out=None):
        self.config = config
        self.out = Path(out if out is not None else config.out)
        self.seeds = phase_seeds(config.seed)
        self.log = MetricsLog(self.out / "metrics.jsonl")
        self.timings: dict[str, float] = {}

    @property
    def ckpt(self) -> Path:
        return self.out / "checkpoints"

    def artifacts(self) -> dict[str, str]:
        names = ["checkpoints/teacher", "checkpoints/generator", "checkpoints/discriminator",
                 "checkpoints/student", "data/original_train.csv", "data/original_test.csv",
                 "data/collected.csv", "data/synthetic.csv", "data/hybrid.csv",
                 "metrics.jsonl", "report.json"]
        return {n: str(self.out / n) for n in names}

    def write_manifest(self, command: str) -> Path:
        """Written once before training; never rewritten."""
        self.out.mkdir(parents=True, exist_ok=True)
        name = "manifest.json" if command == "run-all" else f"manifest-{command}.json"
        manifest = {
            "command": command,
            "config": self.config.to_dict(),
            "phase_seeds": self.seeds,
            "artifacts": self.artifacts(),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "library_version": __version__,
            "kernel_backend": kernels.BACKEND,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
        }
        path = self.out / name
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        return path

    def timed(self, phase: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[phase] = time.perf_counter() - t0
        self.log({"phase": "timing", "name": phase, "seconds": self.timings[phase]})
        return result

    def write_timings(self) -> None:
        (self.out / "timings.json").write_text(json.dumps(self.timings, indent=2) + "\n")


# -- phases ----------------------------------------------------------------

def imbalance_weights(config: ExperimentConfig) -> np.ndarray:
    if config.imbalance_profile:
        return np.asarray(config.imbalance_profile, dtype=np.float64)
    return D.geometric_profile(config.num_classes, config.imbalance_ratio)


def prepare_data(run: Run, dump: bool = True) -> RunData:
    cfg, seeds = run.config, run.seeds
    means = D.corner_means(cfg.num_classes, cfg.separation)
    full = D.make_gaussian_mixture(cfg.num_classes, cfg.n_per_class, means,
                                   cfg.covariance_scale, seeds["data"])
    train, test = D.train_test_split(full, cfg.test_fraction, seeds["split"])
    collected = D.sample_collected(train, cfg.rho, imbalance_weights(cfg), seeds["collected"])
    if dump:
        D.write_csv(train, run.out / "data" / "original_train.csv")
        D.write_csv(test, run.out / "data" / "original_test.csv")
        D.write_csv(collected, run.out / "data" / "collected.csv")
    return RunData(train, test, collected)


def pretrain_teacher(run: Run, data: RunData) -> tuple[Classifier, float]:
    """Cross-entropy training on the full original training split."""
    cfg = run.config
    teacher, _ = train_classifier(cfg.teacher_config(run.seeds["teacher"]), data.train,
                                  data.train.dim, cfg.feature_dim, data.test,
                                  phase="teacher", log=run.log)
    teacher.freeze()
    acc = evaluate(teacher, data.test)
    save_checkpoint(teacher, run.ckpt, "teacher", seed=run.seeds["teacher"], test_acc=repr(acc))
    return teacher, acc


def load_teacher(run: Run) -> Classifier:
    return load_checkpoint(run.ckpt, "teacher").freeze()


def train_generation(run: Run, teacher: Classifier, data: RunData) -> GanResult:
    cfg = run.config
    res = train_gan(cfg.gan_config(run.seeds["gan"]), teacher, data.collected, log=run.log)
    save_checkpoint(res.generator, run.ckpt, "generator", seed=run.seeds["gan"])
    save_checkpoint(res.discriminator, run.ckpt, "discriminator", seed=run.seeds["gan"])
    return res


def distill(run: Run, teacher: Classifier, generator, data: RunData,
            inflation: int | None = None, save: bool = True) -> dict:
    """Synthesize, inflate and mix, train the student, evaluate, and measure the gap."""
    cfg = run.config
    counts = np.full(cfg.num_classes, cfg.synthetic_per_class)
    synthetic = generate_synthetic(generator, counts, run.seeds["synthetic"])
    n = inflation or cfg.inflation or D.default_inflation(len(synthetic), len(data.collected))
    hybrid = D.mix(D.inflate(data.collected, n), synthetic, run.seeds["mix"], n)
    dcfg = replace(cfg.distill_config(run.seeds["student"]), inflation=n)
    student, smetrics = train_student(dcfg, teacher, hybrid, data.test, log=run.log)
    hist = class_histogram(teacher, synthetic)
    result = {
        "inflation_factor": n,
        "alpha": hybrid.alpha,
        "n_collected": len(data.collected),
        "n_synthetic": len(synthetic),
        "synthetic_histogram": hist.tolist(),
        "synthetic_hist_entropy": entropy(hist),
        "synthetic_hist_min_freq": float(hist.min() / hist.sum()),
        "teacher_agreement": teacher_agreement(teacher, synthetic),
        "student_test_acc": evaluate(student, data.test),
        "student_final_align": smetrics[-1]["loss_align"],
        "tvd": tvd_report(data.collected, synthetic, hybrid, cfg.tvd_bins),
        "student_digest": parameter_digest(student),
    }
    if save:
        save_checkpoint(student, run.ckpt, "student", seed=run.seeds["student"],
                        inflation_factor=n)
        D.write_csv(synthetic, run.out / "data" / "synthetic.csv")
        D.write_csv(hybrid.base, run.out / "data" / "hybrid.csv")
    return result


def train_baseline(run: Run, data: RunData) -> float:
    """Student architecture trained by cross-entropy on the collected data alone."""
    cfg = run.config
    base_cfg = replace(cfg.distill_config(run.seeds["baseline"]))
    net, _ = train_classifier(base_cfg, data.collected, data.collected.dim, cfg.feature_dim,
                              data.test, phase="baseline", log=run.log)
    return evaluate(net, data.test)


def _report_config(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out")
    return d


def run_all(config: ExperimentConfig, out=None) -> dict:
    """pretrain -> GAN -> synthesize -> inflate/mix -> student -> evaluate -> TVD."""
    run = Run(config, out)
    if (run.out / "metrics.jsonl").exists():
        (run.out / "metrics.jsonl").unlink()
    run.write_manifest("run-all")
    t0 = time.perf_counter()
    data = _phase("data", run.timed, "data", prepare_data, run)
    teacher, teacher_acc = _phase("pretrain-teacher", run.timed, "teacher", pretrain_teacher, run, data)
    gan = _phase("train-gan", run.timed, "gan", train_generation, run, teacher, data)
    result = _phase("distill", run.timed, "student", distill, run, teacher, gan.generator, data)
    report = {
        "config": _report_config(config),
        "phase_seeds": run.seeds,
        "teacher_test_acc": teacher_acc,
        "collected_counts": data.collected.class_counts.tolist(),
        "gan_final": gan.metrics[-1],
    }
    report.update(result)
    if config.run_baseline:
        report["baseline_test_acc"] = _phase("baseline", run.timed, "baseline", train_baseline, run, data)
    report["checkpoint_sha256"] = {
        name: load_manifest_digest(run, name)
        for name in ("teacher", "generator", "discriminator", "student")}
    write_report(run, report)
    run.timings["total"] = time.perf_counter() - t0
    run.write_timings()
    return report


class PhaseError(RuntimeError):
    def __init__(self, phase: str, exc: Exception):
        super().__init__(f"phase {phase} failed: {exc}")
        self.phase = phase
        self.cause = exc


def _phase(name, fn, *args, **kwargs):
    from .optim import DivergenceError

    try:
        return fn(*args, **kwargs)
    except DivergenceError:
        raise
    except (ValueError, RuntimeError) as exc:
        if isinstance(exc, PhaseError):
            raise
        raise PhaseError(name, exc) from exc


def load_manifest_digest(run: Run, name: str) -> str:
    from .models import read_manifest

    return read_manifest(run.ckpt / f"{name}.manifest")["sha256"]


def write_report(run: Run, report: dict) -> Path:
    path = run.out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


# -- sweeps and ablations --------------------------------------------------

ABLATIONS = {
    "full": {},
    "no_blend": {"disable_blend": True},
    "no_trans": {"disable_trans": True},
    "no_reg": {"disable_reg": True},
    "plain_adc": {"disable_blend": True, "disable_trans": True, "disable_reg": True},
}


def _ablation_worker(args):
    config, out = args
    return run_all(config, out)


def ablate(config: ExperimentConfig, out=None, variants=None, jobs: int = 1) -> dict:
    """Run the pipeline once per generation ablation, in separate output directories."""
    root = Path(out if out is not None else config.out)
    names = list(variants or ABLATIONS)
    tasks = []
    for name in names:
        cfg = replace(config, **ABLATIONS[name], run_baseline=False)
        tasks.append((cfg, str(root / name)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_ablation_worker, tasks))
    else:
        reports = [_ablation_worker(t) for t in tasks]
    summary = {name: _summary(r) for name, r in zip(names, reports)}
    root.mkdir(parents=True, exist_ok=True)
    (root / "ablation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _summary(report: dict) -> dict:
    return {"student_test_acc": report["student_test_acc"],
            "teacher_agreement": report["teacher_agreement"],
            "synthetic_hist_entropy": report["synthetic_hist_entropy"],
            "synthetic_hist_min_freq": report["synthetic_hist_min_freq"],
            "alpha": report["alpha"], "tvd_uq": report["tvd"]["tvd_uq"]}


def sweep_inflation(config: ExperimentConfig, values, out=None) -> dict:
    """Train teacher and GAN once, then distill once per inflation factor."""
    run = Run(config, out)
    run.write_manifest("sweep-inflation")
    data = prepare_data(run)
    teacher, _ = pretrain_teacher(run, data)
    gan = train_generation(run, teacher, data)
    rows = {}
    for n in values:
        r = distill(run, teacher, gan.generator, data, inflation=int(n), save=False)
        rows[str(n)] = {"alpha": r["alpha"], "student_test_acc": r["student_test_acc"],
                        "tvd_uq": r["tvd"]["tvd_uq"], "tvd_up": r["tvd"]["tvd_up"]}
    (run.out / "sweep_inflation.json").write_text(json.dumps(rows, indent=2) + "\n")
    return rows


def sweep(config: ExperimentConfig, key: str, values, out=None) -> dict:
    """One full run per value of ``key``; results are reported, not judged."""
    root = Path(out if out is not None else config.out)
    rows = {}
    for value in values:
        cfg = config.override({key: str(value), "out": str(root / f"{key}={value}")})
        report = run_all(cfg)
        rows[str(value)] = _summary(report) | {"baseline_test_acc": report.get("baseline_test_acc")}
    root.mkdir(parents=True, exist_ok=True)
    (root / f"sweep_{key}.json").write_text(json.dumps(rows, indent=2) + "\n")
    return rows
