"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Prints per-kernel timings for each importable backend, then times a short
GAN phase end to end under each backend (each in a fresh interpreter,
selected through HIDFD_BACKEND).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hidfd.kernels import backends

SHAPES = {"small (32x64 @ 64x32)": ((32, 64), (64, 32)),
          "batch (64x2 @ 2x64)": ((64, 2), (2, 64)),
          "wide (256x128 @ 128x64)": ((256, 128), (128, 64))}

PIPELINE = """
import time
from hidfd.config import ExperimentConfig
from hidfd import pipeline as P, kernels
cfg = ExperimentConfig(teacher_epochs=20, gan_epochs=40, student_epochs=24)
run = P.Run(cfg, '{out}')
data = P.prepare_data(run, dump=False)
t0 = time.perf_counter()
teacher, _ = P.pretrain_teacher(run, data)
P.train_generation(run, teacher, data)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def bench_kernels(repeat: int) -> None:
    rng = np.random.default_rng(0)
    found = backends()
    print(f"{'kernel':<34}" + "".join(f"{name:>14}" for name in found))
    for label, (sa, sb) in SHAPES.items():
        a, b = rng.normal(size=sa), rng.normal(size=sb)
        row = [min(timeit.repeat(lambda m=m: m.matmul(a, b), number=repeat, repeat=3)) / repeat
               for m in found.values()]
        print(f"{'matmul ' + label:<34}" + "".join(f"{t * 1e6:>12.1f}us" for t in row))
    logits = rng.normal(size=(64, 8))
    row = [min(timeit.repeat(lambda m=m: m.log_softmax(logits), number=repeat, repeat=3)) / repeat
           for m in found.values()]
    print(f"{'log_softmax 64x8':<34}" + "".join(f"{t * 1e6:>12.1f}us" for t in row))
    x, y = rng.normal(size=(64, 32)), rng.normal(size=(64, 32))
    row = [min(timeit.repeat(lambda m=m: m.row_sqdist(x, y), number=repeat, repeat=3)) / repeat
           for m in found.values()]
    print(f"{'row_sqdist 64x32':<34}" + "".join(f"{t * 1e6:>12.1f}us" for t in row))


def bench_pipeline(out: str) -> None:
    for name in backends():
        env = dict(os.environ, HIDFD_BACKEND=name)
        code = PIPELINE.format(out=os.path.join(out, name))
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        backend, seconds = res.stdout.split()
        print(f"teacher + 40-epoch GAN [{backend}]: {float(seconds):.2f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if not args.skip_pipeline:
        bench_pipeline(args.out)


if __name__ == "__main__":
    main()
