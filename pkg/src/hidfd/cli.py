"""Command-line entry point: ``hidfd <subcommand> [--config PATH] [--set k=v ...]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for divergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hidfd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("pretrain-teacher", "train the teacher on the original data"),
        ("train-gan", "train the teacher-guided conditional GAN"),
        ("distill", "synthesize, mix and distill the student"),
        ("run-all", "every phase in sequence, then the final report"),
        ("report", "print a summary of an existing report.json"),
    ]:
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("verify-theory", help="numeric check of the theory identities")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("ablate", help="one run per generation ablation")
    _common(p)
    p.add_argument("--variants", help="comma-separated subset of the ablations")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes")
    p = sub.add_parser("sweep-inflation", help="student accuracy across inflation factors")
    _common(p)
    p.add_argument("--values", default="1,2,4,8,16", help="comma-separated inflation factors")
    p = sub.add_parser("sweep", help="one full run per value of a config key")
    _common(p)
    p.add_argument("--key", required=True, help="config key to vary, e.g. rho or lambda_g")
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    return cfg.override(overrides)


def _print_report(report: dict) -> None:
    keys = ["teacher_test_acc", "student_test_acc", "baseline_test_acc", "inflation_factor",
            "alpha", "teacher_agreement", "synthetic_hist_entropy", "synthetic_hist_min_freq"]
    for k in keys:
        if k in report:
            print(f"{k:<24} {report[k]}")
    if "tvd" in report:
        t = report["tvd"]
        print(f"{'tvd(P,Q)':<24} {t['tvd_pq']:.6f}")
        print(f"{'tvd(U,P)':<24} {t['tvd_up']:.6f}  predicted {t['tvd_up_predicted']:.6f}")
        print(f"{'tvd(U,Q)':<24} {t['tvd_uq']:.6f}  bound {t['bound']:.6f}")


def _dispatch(args) -> int:
    from . import pipeline as P
    from .theory import theory_suite

    if args.command == "verify-theory":
        results = theory_suite(args.trials, args.seed)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_DIVERGED

    cfg = load_config(args)
    if args.command == "run-all":
        _print_report(P.run_all(cfg))
        print(f"report written to {Path(cfg.out) / 'report.json'}")
    elif args.command == "pretrain-teacher":
        run = P.Run(cfg)
        run.write_manifest(args.command)
        data = P.prepare_data(run)
        _, acc = P.pretrain_teacher(run, data)
        print(f"teacher test accuracy {acc:.4f}")
    elif args.command == "train-gan":
        run = P.Run(cfg)
        run.write_manifest(args.command)
        data = P.prepare_data(run, dump=False)
        res = P.train_generation(run, P.load_teacher(run), data)
        last = res.metrics[-1]
        print(f"gan done: hist entropy {last['hist_entropy']:.4f}, "
              f"min freq {last['hist_min_freq']:.4f}")
    elif args.command == "distill":
        from .models import load_checkpoint

        run = P.Run(cfg)
        run.write_manifest(args.command)
        data = P.prepare_data(run, dump=False)
        generator = load_checkpoint(run.ckpt, "generator")
        result = P.distill(run, P.load_teacher(run), generator, data)
        _print_report(result)
    elif args.command == "ablate":
        variants = args.variants.split(",") if args.variants else None
        unknown = set(variants or []) - set(P.ABLATIONS)
        if unknown:
            raise ConfigError(f"unknown ablation(s): {', '.join(sorted(unknown))}")
        summary = P.ablate(cfg, variants=variants, jobs=args.jobs)
        for name, row in summary.items():
            print(f"{name:<10} " + "  ".join(f"{k}={v:.4f}" for k, v in sorted(row.items())))
    elif args.command == "sweep-inflation":
        try:
            values = [int(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad --values {args.values!r}") from None
        if not values or min(values) < 1:
            raise ConfigError("inflation factors must be positive integers")
        for n, row in P.sweep_inflation(cfg, values).items():
            print(f"N={n:<4} " + "  ".join(f"{k}={v:.4f}" for k, v in row.items()))
    elif args.command == "sweep":
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("--values is empty")
        for value in values:  # fail on a bad key or value before any training
            cfg.override({args.key: value})
        for value, row in P.sweep(cfg, args.key, values).items():
            print(f"{args.key}={value:<8} " + "  ".join(
                f"{k}={v:.4f}" for k, v in sorted(row.items()) if v is not None))
    elif args.command == "report":
        path = Path(cfg.out) / "report.json"
        if not path.is_file():
            raise ConfigError(f"no report at {path}")
        _print_report(json.loads(path.read_text()))
    return EXIT_OK


def main(argv=None) -> int:
    from .models import CheckpointError
    from .optim import DivergenceError
    from .pipeline import PhaseError

    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PhaseError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
