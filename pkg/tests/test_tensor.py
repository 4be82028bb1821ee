import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcheck import check
from hidfd import tensor as T
from hidfd.tensor import ContractError, DimensionError, Tape, Tensor

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_matmul_identity(rng):
    m = rng.normal(size=(3, 3))
    out = T.matmul(Tensor(np.eye(3)), Tensor(m))
    assert np.array_equal(out.data, m)


def test_relu_definition():
    assert T.relu(Tensor([-1.0, 2.0])).data.tolist() == [0.0, 2.0]


def test_log_softmax_symmetric():
    out = T.log_softmax(Tensor([[0.0, 0.0]])).data
    assert np.allclose(out, np.log(0.5), rtol=0, atol=1e-15)


def test_log_softmax_stable_for_large_logits():
    out = T.log_softmax(Tensor([[1000.0, 0.0, -1000.0]])).data
    assert np.isfinite(out).all()
    assert out[0, 0] == 0.0


def test_log_sigmoid_stable():
    out = T.log_sigmoid(Tensor([-800.0, 0.0, 800.0])).data
    assert np.isfinite(out).all()
    assert out[1] == pytest.approx(np.log(0.5))
    assert out[0] == pytest.approx(-800.0)


@pytest.mark.parametrize("op", [T.matmul, T.add, T.sub, T.mul, T.sq_distance, T.distance])
def test_shape_mismatch_names_operation(op):
    with pytest.raises(DimensionError, match=op.__name__):
        op(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


def test_sum_gradient_is_ones():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        loss = T.sum(x)
    grads = T.backward(tape, loss)
    assert grads[x].tolist() == [1.0, 1.0, 1.0]
    assert x.grad.tolist() == [1.0, 1.0, 1.0]


def test_squared_distance_gradient_zero_at_minimum():
    x = Tensor([[0.5, -1.0]], requires_grad=True)
    y = Tensor([[0.5, -1.0]])
    with Tape() as tape:
        loss = T.sum(T.sq_distance(x, y))
    assert np.array_equal(T.backward(tape, loss)[x], np.zeros((1, 2)))


def test_distance_subgradient_at_zero_is_zero():
    x = Tensor([[1.0, 2.0]], requires_grad=True)
    with Tape() as tape:
        loss = T.sum(T.distance(x, Tensor([[1.0, 2.0]])))
    g = T.backward(tape, loss)[x]
    assert np.isfinite(g).all() and not g.any()


def test_non_scalar_loss_is_contract_error():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = T.scale(x, 2.0)
    with pytest.raises(ContractError):
        T.backward(tape, y)


def test_loss_from_other_tape_rejected():
    x = Tensor([1.0], requires_grad=True)
    with Tape():
        loss = T.sum(x)
    with Tape() as other, pytest.raises(ContractError):
        T.backward(other, loss)


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with Tape() as tape:
        with T.no_grad():
            T.sum(T.exp(x))
    assert len(tape) == 0


def test_unreached_leaf_gets_zero_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    w = Tensor([3.0, 4.0], requires_grad=True)
    with Tape() as tape:
        T.mul(w, Tensor([1.0, 1.0]))
        loss = T.sum(x)
    grads = T.backward(tape, loss)
    assert grads[w].shape == w.shape and not grads[w].any()


def test_replay_reproduces_forward_exactly(rng):
    a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    with Tape() as tape:
        h = T.relu(T.matmul(a, b))
        out = T.log_softmax(h)
        T.mean(T.take(out, np.array([0, 1, 0, 1])))
    replayed = tape.replay()
    for node, val in zip(tape.nodes, replayed):
        assert np.array_equal(node.output.data, val)


def test_gradients_match_shapes(rng):
    a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(3,)), requires_grad=True)
    with Tape() as tape:
        loss = T.mean(T.softmax(T.add(a, b)))
    grads = T.backward(tape, loss)
    assert grads[a].shape == a.shape and grads[b].shape == b.shape


def test_gather_rows_accumulates_repeated_indices():
    e = Tensor(np.eye(3), requires_grad=True)
    with Tape() as tape:
        loss = T.sum(T.gather_rows(e, np.array([1, 1, 2])))
    g = T.backward(tape, loss)[e]
    assert g.sum(axis=1).tolist() == [0.0, 6.0, 3.0]


def test_take_rejects_bad_index():
    with pytest.raises((DimensionError, IndexError, ValueError)):
        T.take(Tensor(np.zeros((2, 3))), np.array([0]))


COMPOSITES = {
    "matmul_relu": lambda a, b, c: T.sum(T.relu(T.matmul(a, b))),
    "softmax_log": lambda a, b, c: T.mean(T.log(T.softmax(T.matmul(a, b)))),
    "log_sigmoid": lambda a, b, c: T.sum(T.log_sigmoid(T.matmul(a, b))),
    "distance": lambda a, b, c: T.mean(T.distance(T.matmul(a, b), c)),
    "sq_distance": lambda a, b, c: T.mean(T.sq_distance(T.matmul(a, b), c)),
    "concat_transpose": lambda a, b, c: T.sum(T.mul(T.transpose(T.concat([a, a], axis=1)),
                                                    T.transpose(T.concat([a, a], axis=1)))),
    "exp_mean_axis": lambda a, b, c: T.sum(T.exp(T.mean(T.matmul(a, b), axis=0))),
    "sub_scale": lambda a, b, c: T.sum(T.scale(T.sub(T.matmul(a, b), c), 0.3) * T.matmul(a, b)),
}


@pytest.mark.parametrize("name", sorted(COMPOSITES))
@pytest.mark.parametrize("seed", range(5))
def test_composite_gradients_match_finite_differences(name, seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    c = Tensor(rng.normal(size=(3, 2)))
    assert check(lambda: COMPOSITES[name](a, b, c), [a, b]) < 1e-6


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite))
def test_forward_values_finite(x):
    with Tape():
        t = Tensor(x, requires_grad=True)
        out = T.log_softmax(T.relu(t))
        s = T.log_sigmoid(t)
    assert np.isfinite(out.data).all() and np.isfinite(s.data).all()


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 5), elements=finite))
def test_softmax_rows_sum_to_one(x):
    p = T.softmax(Tensor(x)).data
    assert np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6))
def test_tensor_size_matches_values(values):
    t = Tensor(values)
    assert t.size == len(values) == int(np.prod(t.shape))
