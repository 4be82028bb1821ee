"""Randomised small-network instances for every training loss."""
import numpy as np

from hidfd import tensor as T
from hidfd.distillation import loss_align, make_student
from hidfd.generation import (ClassFrequencyTracker, adc_d_terms, adc_g_terms, loss_adc_d,
                              loss_adc_g, loss_blend, loss_reg, loss_trans)
from hidfd.models import AdcDiscriminator, Classifier, ConditionalGenerator
from hidfd.tensor import Tensor


def _jitter(rng, *nets):
    # zero biases put exact ReLU kinks on dead-unit paths; move off them
    for net in nets:
        for p in net.parameters():
            if p.data.ndim == 1:
                p.data = rng.normal(scale=0.5, size=p.shape)


def _setup(seed):
    rng = np.random.default_rng(seed)
    C = int(rng.integers(2, 4))
    din, f, B = 2, 3, int(rng.integers(2, 5))
    teacher = Classifier.build([din, 4, f], C, rng)
    d = AdcDiscriminator.build([din, 4, f], C, rng)
    # nonzero class embeddings so the classification terms carry gradient
    for emb in (d.class_real, d.class_fake):
        emb.data = rng.normal(size=emb.shape)
    _jitter(rng, teacher, d)
    xr = rng.normal(size=(B, din)) * 2
    xf = rng.normal(size=(B, din)) * 2
    yr = rng.integers(0, C, B)
    yf = rng.integers(0, C, B)
    return rng, C, teacher, d, xr, yr, xf, yf


def case_adc_d(seed):
    _, _, _, d, xr, yr, xf, yf = _setup(seed)
    return (lambda: loss_adc_d(d, xr, yr, xf, yf)), d.parameters()


def case_adc_d_cls(seed):
    _, _, _, d, xr, yr, xf, yf = _setup(seed)
    return (lambda: adc_d_terms(d, d.features(xr), yr, d.features(xf), yf)[1]), d.parameters()


def case_adc_g(seed):
    """Generator loss, differentiated w.r.t. the generator through a fixed discriminator."""
    rng, C, _, d, _, _, _, yf = _setup(seed)
    g = ConditionalGenerator.build(C, 2, 2, (4,), 2, rng)
    _jitter(rng, g)
    z = rng.normal(size=(len(yf), 2))
    return (lambda: loss_adc_g(d, g(z, yf), yf)), g.parameters()


def case_adc_g_cls(seed):
    _, _, _, d, _, _, xf, yf = _setup(seed)
    x = Tensor(xf, requires_grad=True)
    return (lambda: adc_g_terms(d, d.features(x), yf)[1]), [x]


def case_blend(seed):
    _, _, teacher, d, xr, _, xf, _ = _setup(seed)
    return (lambda: loss_blend(teacher, d, xr, xf, p=0.9, q=0.7)), d.parameters()


def case_trans(seed):
    _, _, teacher, d, xr, _, xf, _ = _setup(seed)
    return (lambda: loss_trans(teacher, d, xr, xf)), d.parameters()


def case_reg(seed):
    rng, C, teacher, _, _, _, xf, _ = _setup(seed)
    n_hat = ClassFrequencyTracker(rng.random(C) + 0.1).normalized()
    # unit-scale inputs keep the teacher softmax away from saturation, where
    # the gradient shrinks below central-difference roundoff
    x = Tensor(xf / 2, requires_grad=True)
    return (lambda: loss_reg(teacher, x, n_hat)), [x]


def case_align(seed):
    rng, _, teacher, _, xr, _, _, _ = _setup(seed)
    student = make_student(teacher, (4,), rng)
    _jitter(rng, student.phi)
    return (lambda: loss_align(teacher, student, xr)), student.phi.parameters()


def case_total_d(seed):
    _, _, teacher, d, xr, yr, xf, yf = _setup(seed)

    def f():
        extra = loss_blend(teacher, d, xr, xf, 0.9, 0.7) + loss_trans(teacher, d, xr, xf)
        return loss_adc_d(d, xr, yr, xf, yf) + T.scale(extra, 0.1)
    return f, d.parameters()


def case_total_g(seed):
    rng, C, teacher, d, _, _, _, yf = _setup(seed)
    g = ConditionalGenerator.build(C, 2, 2, (4,), 2, rng)
    _jitter(rng, g)
    z = rng.normal(size=(len(yf), 2))
    n_hat = ClassFrequencyTracker(rng.random(C) + 0.1).normalized()

    def f():
        fake = g(z, yf)
        return loss_adc_g(d, fake, yf) + T.scale(loss_reg(teacher, fake, n_hat), 0.1)
    return f, g.parameters()


def case_cross_entropy(seed):
    rng, _, teacher, _, xr, yr, _, _ = _setup(seed)
    return (lambda: -T.mean(T.take(T.log_softmax(teacher(xr)), yr))), teacher.parameters()


CASES = {
    "adc_d": case_adc_d, "adc_d_cls": case_adc_d_cls, "adc_g": case_adc_g,
    "adc_g_cls": case_adc_g_cls, "blend": case_blend, "trans": case_trans, "reg": case_reg,
    "align": case_align, "total_d": case_total_d, "total_g": case_total_g,
    "cross_entropy": case_cross_entropy,
}
