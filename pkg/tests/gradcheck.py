"""Central finite-difference gradient checking for tape-built losses."""
import numpy as np

from hidfd import tensor as T
from hidfd.tensor import Tape

STEP = 1e-5
REL_TOL = 1e-6


def numeric_grads(loss_fn, params, h=STEP):
    out = []
    with T.no_grad():
        for p in params:
            g = np.zeros_like(p.data)
            it = np.nditer(p.data, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                orig = p.data[i]
                p.data[i] = orig + h
                up = loss_fn().item()
                p.data[i] = orig - h
                down = loss_fn().item()
                p.data[i] = orig
                g[i] = (up - down) / (2 * h)
            out.append(g)
    return out


def analytic_grads(loss_fn, params):
    with Tape() as tape:
        loss = loss_fn()
    grads = T.backward(tape, loss)
    return [grads.get(p, np.zeros_like(p.data)) for p in params]


def relative_error(a, n) -> float:
    a = np.concatenate([x.ravel() for x in a])
    n = np.concatenate([x.ravel() for x in n])
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
    return float(np.linalg.norm(a - n) / scale)


def check(loss_fn, params) -> float:
    """Relative error between tape gradients and central differences."""
    return relative_error(analytic_grads(loss_fn, params), numeric_grads(loss_fn, params))
