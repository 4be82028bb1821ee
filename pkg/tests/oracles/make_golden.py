"""Regenerate tests/golden.json from plain numpy, without importing hidfd.

Run from the repository root: python3 tests/oracles/make_golden.py
"""
import hashlib
import json
from pathlib import Path

import numpy as np


def uniform_init(rng, fan_in, fan_out):
    b = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-b, b, size=(fan_in, fan_out))


def mlp(x, weights, acts):
    h = x
    for w, a in zip(weights, acts):
        h = h @ w  # biases start at zero
        if a == "relu":
            h = np.maximum(h, 0.0)
    return h


def feature_golden():
    rng = np.random.default_rng(1234)
    w1 = uniform_init(rng, 2, 5)
    w2 = uniform_init(rng, 5, 3)
    x = np.array([[0.3, -1.2], [2.0, 0.5], [-0.7, -0.1]])
    return {"x": x.tolist(), "features": mlp(x, [w1, w2], ["relu", "relu"]).tolist()}


def generator_golden():
    rng = np.random.default_rng(99)
    emb = uniform_init(rng, 3, 2)
    w1 = uniform_init(rng, 4, 6)
    w2 = uniform_init(rng, 6, 2)
    z = np.array([[0.1, -0.4], [1.5, 0.2], [-0.3, 0.9]])
    y = np.array([0, 2, 1])
    h = np.concatenate([z, emb[y]], axis=1)
    return {"z": z.tolist(), "y": y.tolist(), "out": mlp(h, [w1, w2], ["relu", "linear"]).tolist()}


def mixture_golden():
    rng = np.random.default_rng(2024)
    means = np.array([[1.0, 1.0], [-1.0, -1.0], [2.0, -2.0]])
    counts = [4, 3, 5]
    xs = [means[c] + np.sqrt(0.5) * rng.standard_normal((counts[c], 2)) for c in range(3)]
    x = np.concatenate(xs).astype("<f8")
    return {"means": means.tolist(), "counts": counts, "scale": 0.5, "seed": 2024,
            "sha256": hashlib.sha256(x.tobytes()).hexdigest()}


def phase_seed_golden():
    out = {}
    for phase in ("data", "gan", "student"):
        d = hashlib.sha256(f"7:{phase}".encode()).digest()
        out[phase] = int.from_bytes(d[:8], "little") >> 1
    return out


if __name__ == "__main__":
    golden = {"feature_network": feature_golden(), "generator": generator_golden(),
              "gaussian_mixture": mixture_golden(), "phase_seeds_master7": phase_seed_golden()}
    path = Path(__file__).resolve().parents[1] / "golden.json"
    path.write_text(json.dumps(golden, indent=2) + "\n")
    print(f"wrote {path}")
