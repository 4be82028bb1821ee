import numpy as np
import pytest

from hidfd.optim import (LOSS_LIMIT, Adam, AdamState, DivergenceError, StepSchedule, adam_step,
                         guard, sgd_step)
from hidfd.tensor import DimensionError, Tensor


def test_plain_sgd_subtracts_gradient():
    p = Tensor([1.0, -2.0])
    sgd_step([p], [np.array([0.5, 0.25])], lr=1.0)
    assert p.data.tolist() == [0.5, -2.25]


def test_zero_gradient_leaves_params():
    p = Tensor([1.0, 2.0])
    v = None
    for _ in range(5):
        v = sgd_step([p], [np.zeros(2)], lr=0.1, momentum=0.9, velocity=v)
    assert p.data.tolist() == [1.0, 2.0]


def test_momentum_matches_hand_recurrence():
    p = Tensor([1.0])
    g = np.array([0.2])
    v = sgd_step([p], [g], lr=0.1, momentum=0.9)
    sgd_step([p], [g], lr=0.1, momentum=0.9, velocity=v)
    # v1 = 0.2, p1 = 0.98 ; v2 = 0.9 * 0.2 + 0.2 = 0.38, p2 = 0.98 - 0.038
    assert p.data[0] == pytest.approx(0.942, abs=1e-15)


def test_weight_decay_enters_velocity():
    p = Tensor([2.0])
    sgd_step([p], [np.array([0.0])], lr=0.5, weight_decay=0.1)
    assert p.data[0] == pytest.approx(2.0 - 0.5 * 0.2)


def test_sgd_shape_mismatch():
    with pytest.raises(DimensionError):
        sgd_step([Tensor([1.0, 2.0])], [np.zeros(3)], lr=0.1)


def test_adam_zero_gradient_from_zero_state():
    p = Tensor([1.5, -0.5])
    adam_step([p], [np.zeros(2)], None, lr=0.1)
    assert p.data.tolist() == [1.5, -0.5]


def test_adam_degenerate_betas():
    p = Tensor([1.0, 1.0])
    g = np.array([0.3, -2.0])
    adam_step([p], [g], None, lr=0.01, beta1=0.0, beta2=0.0, eps=1e-8)
    np.testing.assert_allclose(p.data, 1.0 - 0.01 * g / (np.abs(g) + 1e-8), rtol=0, atol=1e-16)


def _reference_adam(theta, steps, lr, b1, b2, eps, grad):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
    return theta


def test_adam_three_steps_on_quadratic():
    grad = lambda th: 2.0 * (th - 3.0)  # noqa: E731
    p = Tensor([0.5])
    state = AdamState.zeros([p])
    for _ in range(3):
        adam_step([p], [grad(p.data)], state, lr=0.1, beta1=0.9, beta2=0.999)
    assert p.data[0] == pytest.approx(_reference_adam(0.5, 3, 0.1, 0.9, 0.999, 1e-8, grad),
                                      abs=1e-15)


def test_adam_class_uses_grad_dict():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam([p], 0.1)
    opt.step({p: np.array([1.0])})
    assert p.data[0] == pytest.approx(0.9)


def test_schedule_default_breakpoints():
    s = StepSchedule(0.05, 240)
    assert s.milestones() == [150, 180, 210]
    assert [s.lr_at(e) for e in (0, 149, 150, 179, 180, 209, 210, 239)] == pytest.approx(
        [0.05, 0.05, 0.005, 0.005, 0.0005, 0.0005, 0.00005, 0.00005], rel=1e-15)


def test_schedule_scales_with_epochs():
    assert StepSchedule(0.05, 24).milestones() == [15, 18, 21]


def test_schedule_rejects_collapsed_milestones():
    with pytest.raises(ValueError):
        StepSchedule(0.05, 4)


def test_guard_passes_and_trips():
    guard("x", 0, a=1.0, b=-LOSS_LIMIT)
    with pytest.raises(DivergenceError) as exc:
        guard("train-gan", 3, loss_d=float("nan"))
    assert exc.value.epoch == 3 and exc.value.term == "loss_d"
    with pytest.raises(DivergenceError):
        guard("x", 0, a=2 * LOSS_LIMIT)
