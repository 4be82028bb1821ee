"""Numeric checks of the distribution-gap identities and the ADC-GAN
optimal-classifier results on finite discrete distributions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .optim import Adam
from .tensor import Tape, Tensor

MASS_TOL = 1e-9


class DomainError(ValueError):
    """Distributions violate a support requirement (e.g. q > 0 where p = 0)."""


def _dist(P, name="P") -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if (P < 0).any():
        raise ValueError(f"{name} has negative entries")
    if abs(P.sum() - 1.0) > MASS_TOL:
        raise ValueError(f"{name} sums to {P.sum()!r}, not 1")
    return P


def tvd(P, Q) -> float:
    """Total variation distance 0.5 * sum |P - Q| over a common support."""
    P, Q = _dist(P, "P"), _dist(Q, "Q")
    if P.shape != Q.shape:
        raise ValueError(f"support mismatch: {P.shape} vs {Q.shape}")
    return 0.5 * float(np.abs(P - Q).sum())


@dataclass(frozen=True)
class MixtureRecord:
    alpha: float
    tvd_up: float
    tvd_qp: float
    tvd_uq: float
    tvd_pq: float
    bound: float

    @property
    def identity_residual(self) -> float:
        return abs(self.tvd_up - (1.0 - self.alpha) * self.tvd_qp)

    @property
    def bound_slack(self) -> float:
        return self.bound - self.tvd_uq

    def ok(self, tol: float = 1e-12) -> bool:
        return self.identity_residual <= tol and self.bound_slack >= -tol


def mixture_identities(P, Q, alpha: float) -> MixtureRecord:
    """TVDs for U = alpha P + (1 - alpha) Q, with the (2 - alpha) TVD(P, Q) bound."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    P, Q = _dist(P, "P"), _dist(Q, "Q")
    U = alpha * P + (1.0 - alpha) * Q
    tv_pq = tvd(P, Q)
    return MixtureRecord(alpha, tvd(U, P), tvd(Q, P), tvd(U, Q), tv_pq, (2.0 - alpha) * tv_pq)


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint distribution table over X (rows) and Y (columns)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("joint table must be 2-D")
        if (t < 0).any() or abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("joint table must be non-negative with total mass 1")
        object.__setattr__(self, "table", t)

    @property
    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape


def _joint(J) -> DiscreteJoint:
    return J if isinstance(J, DiscreteJoint) else DiscreteJoint(J)


def optimal_adc_classifier(Pjoint, Qjoint):
    """Closed-form optimal 2|Y|-way classifier.

    Returns ``(table, rows)``: column y holds p(x, y)/(p(x)+q(x)), column
    |Y|+y holds q(x, y)/(p(x)+q(x)); ``rows`` lists the retained x indices
    (rows with p(x)+q(x) = 0 are dropped with a warning).
    """
    P, Q = _joint(Pjoint), _joint(Qjoint)
    if P.shape != Q.shape:
        raise ValueError(f"joint shapes differ: {P.shape} vs {Q.shape}")
    mass = P.marginal_x + Q.marginal_x
    rows = np.flatnonzero(mass > 0)
    if rows.size < mass.size:
        warnings.warn(f"dropping {mass.size - rows.size} zero-mass rows", stacklevel=2)
    denom = mass[rows, None]
    table = np.concatenate([P.table[rows] / denom, Q.table[rows] / denom], axis=1)
    return table, rows


@dataclass
class TabularClassifier:
    """Free logits per x over the 2|Y| (class, real/fake) outcomes."""

    logits: np.ndarray

    def probs(self) -> np.ndarray:
        with T.no_grad():
            return np.exp(T.log_softmax(Tensor(self.logits)).data)


def tabular_objective(logits: Tensor, Pjoint, Qjoint) -> Tensor:
    """E_P[log Psi(y+|x)] + E_Q[log Psi(y-|x)] for a logit table."""
    P, Q = _joint(Pjoint), _joint(Qjoint)
    weights = Tensor._wrap(np.concatenate([P.table, Q.table], axis=1))
    return T.sum(T.mul(T.log_softmax(logits), weights))


def train_tabular_classifier(Pjoint, Qjoint, steps: int = 4000, lr: float = 0.05,
                             seed: int = 0) -> TabularClassifier:
    """Maximise the classifier objective by Adam on the logit table."""
    P = _joint(Pjoint)
    rng = np.random.default_rng(seed)
    logits = Tensor(0.01 * rng.standard_normal((P.shape[0], 2 * P.shape[1])), requires_grad=True)
    opt = Adam([logits], lr)
    for step in range(steps):
        # linear decay lets Adam settle instead of hovering at lr-sized steps
        opt.lr = lr * (1.0 - step / steps) + 1e-4
        with Tape() as tape:
            loss = -tabular_objective(logits, Pjoint, Qjoint)
        opt.step(T.backward(tape, loss))
    return TabularClassifier(logits.data.copy())


@dataclass(frozen=True)
class KLCheck:
    lhs: float
    kl: float

    @property
    def rhs(self) -> float:
        return -self.kl

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def kl_divergence(Qjoint, Pjoint) -> float:
    """KL(Q || P); cells with q = 0 contribute nothing, q > 0 = p is a domain error."""
    Q, P = _joint(Qjoint).table, _joint(Pjoint).table
    support = Q > 0
    if (P[support] <= 0).any():
        raise DomainError("Q puts mass where P has none; KL(Q||P) is infinite")
    return float(np.sum(Q[support] * np.log(Q[support] / P[support])))


def kl_equivalence_check(Pjoint, Qjoint) -> KLCheck:
    """Compare E_Q[log Psi*(y+|x)] - E_Q[log Psi*(y-|x)] with -KL(Q || P)."""
    P, Q = _joint(Pjoint), _joint(Qjoint)
    kl = kl_divergence(Q, P)
    table, rows = optimal_adc_classifier(P, Q)
    ny = P.shape[1]
    q = Q.table[rows]
    support = q > 0
    plus, minus = table[:, :ny], table[:, ny:]
    lhs = float(np.sum(q[support] * np.log(plus[support]))
                - np.sum(q[support] * np.log(minus[support])))
    return KLCheck(lhs, kl)


def overfit_gradient_probe(score: float, weight: float = 1.5, noise: float = 0.8,
                           slope: float = 1.0) -> float:
    """|d/dtheta log(1 - D(G_theta(z)))| for a one-parameter toy generator.

    The generator is x = theta * z, the discriminator logit s = slope * x + c
    with c chosen so that D(x) = sigmoid(s) equals ``score``. The chain rule
    gives sigmoid(s) * |slope * z|, so the factor vanishes with the score.
    """
    if not 0.0 < score < 1.0:
        raise ValueError(f"score must lie in (0, 1), got {score}")
    logit = math.log(score) - math.log1p(-score)
    theta = Tensor([[weight]], requires_grad=True)
    z = Tensor([[noise]])
    offset = logit - slope * weight * noise
    with Tape() as tape:
        x = T.matmul(z, theta)
        s = T.scale(x, slope) + Tensor([[offset]])
        loss = T.sum(T.log_sigmoid(-s))
    grads = T.backward(tape, loss)
    return abs(float(grads[theta].ravel()[0]))


# -- random instances ------------------------------------------------------

def random_distribution(rng: np.random.Generator, n: int, sparse: float = 0.0) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    if sparse > 0:
        mask = rng.random(n) < sparse
        if mask.all():
            mask[rng.integers(n)] = False
        p = np.where(mask, 0.0, p)
        p = p / p.sum()
    return p


def random_joint(rng: np.random.Generator, nx: int, ny: int) -> DiscreteJoint:
    t = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    return DiscreteJoint(t / t.sum())


# -- suite -----------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    trials: int

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} worst={self.residual:.3e}  "
                f"tol={self.tolerance:.0e}  trials={self.trials}")


def theory_suite(trials: int = 10_000, seed: int = 0, tabular_instances: int = 20,
                 tabular_steps: int = 4000) -> list[CheckResult]:
    """Run every identity on random instances; worst residual per identity."""
    rng = np.random.default_rng(seed)
    worst_id, worst_slack = 0.0, np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        P, Q = random_distribution(rng, n, 0.3), random_distribution(rng, n, 0.3)
        rec = mixture_identities(P, Q, float(rng.random()))
        worst_id = max(worst_id, rec.identity_residual)
        worst_slack = min(worst_slack, rec.bound_slack)
    results = [
        CheckResult("mixture identity", worst_id <= 1e-12, worst_id, 1e-12, trials),
        CheckResult("mixture bound violation", worst_slack >= -1e-9, max(0.0, -worst_slack), 1e-9,
                    trials),
    ]

    n_kl = max(1, trials // 10)
    worst_kl = 0.0
    for _ in range(n_kl):
        nx, ny = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        P = random_joint(rng, nx, ny)
        Q = random_joint(rng, nx, ny)
        worst_kl = max(worst_kl, kl_equivalence_check(P, Q).residual)
    results.append(CheckResult("kl equivalence", worst_kl < 1e-10, worst_kl, 1e-10, n_kl))

    worst_tab = 0.0
    for i in range(tabular_instances):
        P, Q = random_joint(rng, 4, 3), random_joint(rng, 4, 3)
        closed, _ = optimal_adc_classifier(P, Q)
        trained = train_tabular_classifier(P, Q, steps=tabular_steps, seed=seed + i).probs()
        worst_tab = max(worst_tab, float(np.abs(trained - closed).max()))
    results.append(CheckResult("optimal classifier", worst_tab < 1e-3, worst_tab, 1e-3,
                               tabular_instances))

    base = overfit_gradient_probe(0.5)
    ratio = overfit_gradient_probe(1e-6) / base
    sweep = [overfit_gradient_probe(s) for s in np.linspace(1e-6, 0.5, 200)]
    monotone = all(b > a for a, b in zip(sweep, sweep[1:]))
    results.append(CheckResult("vanishing gradient", ratio < 1e-5 and monotone, ratio, 1e-5, 1))
    return results
