"""Acceptance criteria, one PASS/FAIL line each.

Run alone with ``python3 -m pytest tests/test_acceptance.py`` (lines appear in
the terminal summary) or ``python3 tests/test_acceptance.py``.
"""
import json
from dataclasses import replace
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gradcheck import REL_TOL, check
from gradient_cases import CASES
from hidfd import pipeline as P
from hidfd.config import ExperimentConfig
from hidfd.data import Dataset, default_inflation, inflate, mix
from hidfd.distillation import DistillConfig
from hidfd.generation import ClassFrequencyTracker, class_histogram, generate_synthetic, train_gan
from hidfd.theory import overfit_gradient_probe, theory_suite

SEEDS = [0, 1, 2, 3, 4]


def report(name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name:<22} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def test_gradient_suite():
    t0 = time.perf_counter()
    worst = {name: max(check(*make(seed)) for seed in range(50)) for name, make in CASES.items()}
    elapsed = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    report("gradient suite", max(worst.values()) < REL_TOL and elapsed < 30,
           f"{len(CASES)} losses x 50 cases, worst rel err {worst[top]:.2e} ({top}), "
           f"{elapsed:.1f}s")


def test_theory_oracle():
    t0 = time.perf_counter()
    results = theory_suite(trials=10_000, seed=7, tabular_instances=20)
    elapsed = time.perf_counter() - t0
    oracle = [r for r in results if r.name != "vanishing gradient"]
    detail = ", ".join(f"{r.name} {r.residual:.1e}" for r in oracle)
    report("theory oracle", all(r.passed for r in oracle) and elapsed < 60,
           f"{detail}; {elapsed:.1f}s")


def test_ema_contraction():
    worst = 0.0
    for gamma in (0.1, 0.5, 0.9):
        k, n0 = 8.0, np.array([0.0, 3.0, 20.0, 1000.0])
        t = ClassFrequencyTracker(n0.copy(), gamma)
        for step in range(1, 201):
            t.update(np.full(n0.size, k))
            expected = (1.0 - gamma) ** step * np.abs(n0 - k)
            # scaled by the magnitudes involved: float64 cannot resolve |n - k| below that
            err = np.abs(np.abs(t.n - k) - expected) / np.maximum(np.abs(n0), k)
            worst = max(worst, float(err.max()))
    report("EMA contraction", worst <= 1e-13,
           f"gamma in {{0.1, 0.5, 0.9}}, 200 steps, worst scaled deviation {worst:.1e}")


def test_vanishing_gradient_probe():
    ratio = overfit_gradient_probe(1e-6) / overfit_gradient_probe(0.5)
    report("vanishing gradient", ratio < 1e-5, f"factor(1e-6)/factor(0.5) = {ratio:.2e}")


def test_inflation_mix_arithmetic():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(100):
        n_c, n_s = int(rng.integers(1, 300)), int(rng.integers(1, 5000))
        col = Dataset(np.zeros((n_c, 2)), np.zeros(n_c), 2, "collected")
        syn = Dataset(np.ones((n_s, 2)), np.zeros(n_s), 2, "synthetic")
        n = default_inflation(n_s, n_c)
        h = mix(inflate(col, n), syn, 0, n)
        ok = (n == max(1, n_s // n_c) and len(h) == n * n_c + n_s
              and h.alpha == float(Fraction(n * n_c, n * n_c + n_s)))
        bad += not ok
    report("inflation/mix", bad == 0, f"100 random size pairs, {bad} mismatches")


# -- end to end ------------------------------------------------------------

@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """Full pipeline per seed, plus the same GAN phase with the balance term disabled."""
    root = tmp_path_factory.mktemp("e2e")
    rows = []
    for seed in SEEDS:
        cfg = ExperimentConfig(seed=seed, rho=0.1, out=str(root / f"seed{seed}"))
        t0 = time.perf_counter()
        rep = P.run_all(cfg)
        elapsed = time.perf_counter() - t0
        run = P.Run(cfg)
        data = P.prepare_data(run, dump=False)
        teacher = P.load_teacher(run)
        gcfg = replace(cfg, disable_reg=True).gan_config(run.seeds["gan"])
        gen = train_gan(gcfg, teacher, data.collected).generator
        counts = np.full(cfg.num_classes, cfg.synthetic_per_class)
        hist = class_histogram(teacher, generate_synthetic(gen, counts, run.seeds["synthetic"]))
        rows.append({"seed": seed, "report": rep, "seconds": elapsed, "out": run.out,
                     "noreg_min_freq": float(hist.min() / hist.sum())})
    return rows


def test_end_to_end_directional(e2e):
    student = np.mean([r["report"]["student_test_acc"] for r in e2e])
    baseline = np.mean([r["report"]["baseline_test_acc"] for r in e2e])
    reg = np.mean([r["report"]["synthetic_hist_min_freq"] for r in e2e])
    noreg = np.mean([r["noreg_min_freq"] for r in e2e])
    slowest = max(r["seconds"] for r in e2e)
    per_seed = "; ".join(
        f"s{r['seed']} {r['report']['student_test_acc']:.4f}/{r['report']['baseline_test_acc']:.4f}"
        f" minf {r['report']['synthetic_hist_min_freq']:.4f}/{r['noreg_min_freq']:.4f}"
        for r in e2e)
    print(per_seed)
    ACCEPTANCE_LINES.append(f"      per seed (student/baseline, min-freq reg/no-reg): {per_seed}")
    results = {
        "(a) student>=baseline": (student >= baseline, f"{student:.4f} vs {baseline:.4f}"),
        "(b) minfreq reg>=noreg": (reg >= noreg, f"{reg:.4f} vs {noreg:.4f}"),
        "(c) runtime<10min": (slowest < 600, f"slowest run {slowest:.0f}s"),
    }
    failed = [k for k, (ok, _) in results.items() if not ok]
    for k, (ok, detail) in results.items():
        ACCEPTANCE_LINES.append(f"      {'PASS' if ok else 'FAIL'} {k}: {detail}")
    report("end-to-end", not failed, "; ".join(f"{k} {d}" for k, (_, d) in results.items()))


def test_determinism(e2e, tmp_path):
    first = e2e[0]
    cfg = ExperimentConfig(seed=first["seed"], rho=0.1, out=str(tmp_path / "again"))
    P.run_all(cfg)
    a = (first["out"] / "report.json").read_bytes()
    b = (tmp_path / "again" / "report.json").read_bytes()
    report("determinism", a == b, f"report.json {len(a)} bytes, identical={a == b}")


def test_schedule(e2e):
    expected = [0.05, 0.005, 0.0005, 0.00005]
    rows = [json.loads(line) for line in (e2e[0]["out"] / "metrics.jsonl").read_text().splitlines()]
    lr = {r["epoch"]: r["lr"] for r in rows if r["phase"] == "student"}
    logged = [lr[e] for e in (0, 150, 180, 210)]
    ok = all(abs(a - b) <= 1e-15 * b for a, b in zip(logged, expected))
    for epochs in (24, 48, 100, 480):
        cfg = DistillConfig(epochs=epochs).schedule()
        starts = [0] + cfg.milestones()
        ok &= all(abs(cfg.lr_at(e) - v) <= 1e-15 * v for e, v in zip(starts, expected))
        ok &= all(abs(cfg.lr_at(e - 1) - v) <= 1e-15 * v for e, v in zip(starts[1:], expected))
    report("schedule", ok, f"240 epochs logged lr {logged}; scaled to 24/48/100/480 epochs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
