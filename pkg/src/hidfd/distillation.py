"""Student distillation on hybrid data with a shared, frozen teacher classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import Dataset, HybridDataset, batches
from .models import Classifier, FeatureNetwork, share_classifier
from .optim import SGD, StepSchedule, guard
from .tensor import Tape, Tensor


@dataclass
class DistillConfig:
    epochs: int = 240
    lr: float = 0.05
    milestones: tuple[float, ...] = (150 / 240, 180 / 240, 210 / 240)
    lr_factor: float = 10.0
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    seed: int = 0
    hidden: tuple[int, ...] = (32,)
    inflation: int = 0  # 0: floor(|D_s| / |D_c|)

    def __post_init__(self):
        if self.inflation < 0:
            raise ValueError("inflation must be >= 1, or 0 for the default rule")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        self.schedule()

    def schedule(self) -> StepSchedule:
        return StepSchedule(self.lr, self.epochs, tuple(self.milestones), self.lr_factor)


def lr_at_epoch(config: DistillConfig, epoch: int) -> float:
    return config.schedule().lr_at(epoch)


def loss_align(teacher: Classifier, student: Classifier, x) -> Tensor:
    """Mean Euclidean distance between student and (constant) teacher features."""
    if student.phi.feature_dim != teacher.phi.feature_dim:
        raise ValueError(f"student features ({student.phi.feature_dim}) and teacher features "
                         f"({teacher.phi.feature_dim}) differ in size")
    xd = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    with T.no_grad():
        target = Tensor._wrap(teacher.phi(xd).data)
    return T.mean(T.distance(student.phi(x), target))


def make_student(teacher: Classifier, hidden, rng: np.random.Generator) -> Classifier:
    dims = [teacher.phi.in_dim, *hidden, teacher.phi.feature_dim]
    phi = FeatureNetwork.build(dims, rng)
    return Classifier(phi, share_classifier(teacher.head, phi.feature_dim))


def evaluate(network: Classifier, test: Dataset) -> float:
    """Fraction of test examples whose argmax prediction equals the label."""
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(network.predict(test.x) == test.y))


def feature_gap(teacher: Classifier, student: Classifier, x) -> float:
    with T.no_grad():
        return float(np.mean(np.sqrt(
            np.sum((student.phi(x).data - teacher.phi(x).data) ** 2, axis=1))))


def train_student(config: DistillConfig, teacher: Classifier, hybrid: HybridDataset,
                  test: Dataset | None = None, student: Classifier | None = None,
                  log=None) -> tuple[Classifier, list[dict]]:
    """Minimise the alignment loss by SGD; only the inputs of ``hybrid`` are read."""
    x = hybrid.base.x
    if x.shape[0] == 0:
        raise ValueError("hybrid dataset is empty")
    rng = np.random.default_rng(config.seed)
    if student is None:
        student = make_student(teacher, config.hidden, rng)
    if student.phi.feature_dim != teacher.phi.feature_dim:
        raise ValueError("student and teacher feature sizes differ")
    for p in student.head.parameters():
        p.requires_grad = False
    sched = config.schedule()
    opt = SGD(student.phi.parameters(), config.lr, config.momentum, config.weight_decay)
    saved = [p.requires_grad for p in teacher.parameters()]
    for p in teacher.parameters():
        p.requires_grad = False
    metrics = []
    try:
        for epoch in range(config.epochs):
            opt.lr = sched.lr_at(epoch)
            total, count = 0.0, 0
            for idx in batches(x.shape[0], config.batch_size, rng):
                with Tape() as tape:
                    loss = loss_align(teacher, student, x[idx])
                value = loss.item()
                guard("distill", epoch, loss_align=value)
                if loss.requires_grad:
                    opt.step(T.backward(tape, loss))
                total += value * idx.size
                count += idx.size
            m = {"phase": "student", "epoch": epoch, "lr": opt.lr, "loss_align": total / count}
            if test is not None:
                m["test_acc"] = evaluate(student, test)
                m["feature_gap"] = feature_gap(teacher, student, test.x)
            metrics.append(m)
            if log is not None:
                log(m)
    finally:
        for p, s in zip(teacher.parameters(), saved):
            p.requires_grad = s
    return student, metrics


def train_classifier(config: DistillConfig, train: Dataset, in_dim: int, feature_dim: int,
                     test: Dataset | None = None, phase: str = "baseline",
                     log=None) -> tuple[Classifier, list[dict]]:
    """Plain cross-entropy training with the student's SGD recipe.

    Used for the teacher and for the collected-only baseline.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    net = Classifier.build([in_dim, *config.hidden, feature_dim], train.num_classes, rng)
    sched = config.schedule()
    opt = SGD(net.parameters(), config.lr, config.momentum, config.weight_decay)
    metrics = []
    for epoch in range(config.epochs):
        opt.lr = sched.lr_at(epoch)
        total = 0.0
        for idx in batches(len(train), config.batch_size, rng):
            with Tape() as tape:
                lp = T.log_softmax(net(train.x[idx]))
                loss = -T.mean(T.take(lp, train.y[idx]))
            value = loss.item()
            guard(phase, epoch, loss_ce=value)
            opt.step(T.backward(tape, loss))
            total += value * idx.size
        m = {"phase": phase, "epoch": epoch, "lr": opt.lr, "loss_ce": total / len(train),
             "train_acc": evaluate(net, train)}
        if test is not None:
            m["test_acc"] = evaluate(net, test)
        metrics.append(m)
        if log is not None:
            log(m)
    return net, metrics


# -- distribution gap ------------------------------------------------------

def histogram(ds: Dataset, edges) -> np.ndarray:
    """Normalised 2-D histogram over the given (x-edges, y-edges)."""
    if len(ds) == 0:
        raise ValueError("empty dataset")
    h, _, _ = np.histogram2d(ds.x[:, 0], ds.x[:, 1], bins=edges)
    return h.ravel() / h.sum()


def grid_edges(datasets, bins: int):
    pts = np.concatenate([d.x for d in datasets])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    return [np.linspace(lo[i], hi[i], bins + 1) for i in range(2)]


def tvd_report(collected: Dataset, synthetic: Dataset, hybrid: HybridDataset,
               bins: int = 16) -> dict:
    """Empirical TVDs on a fixed grid over the bounding box of all three sets."""
    from .theory import tvd

    for name, ds in (("collected", collected), ("synthetic", synthetic), ("hybrid", hybrid.base)):
        if len(ds) == 0:
            raise ValueError(f"{name} dataset is empty")
    if collected.dim != 2:
        raise ValueError("tvd_report bins two-dimensional data only")
    edges = grid_edges([collected, synthetic, hybrid.base], bins)
    P = histogram(collected, edges)
    Q = histogram(synthetic, edges)
    U = histogram(hybrid.base, edges)
    alpha = hybrid.alpha
    tv_pq, tv_up, tv_uq = tvd(P, Q), tvd(U, P), tvd(U, Q)
    return {"bins": bins,
            "grid_lo": [float(edges[0][0]), float(edges[1][0])],
            "grid_hi": [float(edges[0][-1]), float(edges[1][-1])],
            "alpha": alpha, "tvd_pq": tv_pq, "tvd_up": tv_up, "tvd_uq": tv_uq,
            "tvd_up_predicted": (1.0 - alpha) * tv_pq,
            "bound": (2.0 - alpha) * tv_pq,
            "bound_slack": (2.0 - alpha) * tv_pq - tv_uq}
