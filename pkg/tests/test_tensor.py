import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gransformer import tensor as T


def close(a, b, tol=1e-12):
    np.testing.assert_allclose(a, b, atol=tol, rtol=0)


def test_identity_matmul_returns_b():
    b = np.arange(12.0).reshape(3, 4)
    out = T.matmul(T.Tensor(np.eye(3)), T.Tensor(b))
    close(out.data, b)


def test_matmul_hand_arithmetic():
    out = T.matmul(T.Tensor([[1.0, 2.0], [3.0, 4.0]]), T.Tensor([[1.0], [1.0]]))
    close(out.data, [[3.0], [7.0]])


def test_matmul_shape_mismatch():
    with pytest.raises(T.ShapeError):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((2, 3))))


def test_sigmoid_at_zero(f64):
    w = T.parameter(np.zeros((1, 1)))
    y = T.sigmoid(w)
    close(y.data, [[0.5]])
    T.total(y).backward()
    close(w.grad, [[0.25]])


def test_log1p_zero_and_domain():
    close(T.log1p(T.Tensor(0.0)).data, 0.0)
    with pytest.raises(T.DomainError):
        T.log1p(T.Tensor(-2.0))


def test_relu_backward_negative_input():
    x = T.parameter(np.array([[-1.0]]))
    T.total(T.relu(x)).backward()
    assert x.grad[0, 0] == 0.0


def test_softmax_symmetric_row():
    close(T.softmax_rows(T.Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])


def test_softmax_large_logit_no_overflow(f64):
    out = T.softmax_rows(T.Tensor([[1000.0, 0.0]])).data
    close(out, [[1.0, 0.0]])
    assert np.all(np.isfinite(out))


def test_masked_softmax_zeroes_masked_entries():
    mask = np.tril(np.ones((3, 3), dtype=bool))
    out = T.softmax_rows(T.Tensor(np.random.default_rng(0).normal(size=(3, 3))), mask).data
    assert np.all(out[~mask] == 0.0)
    close(out.sum(axis=1), np.ones(3), 1e-6)


def test_sum_grad_is_ones():
    w = T.parameter(np.random.default_rng(1).normal(size=(3, 4)))
    T.total(w).backward()
    assert np.array_equal(w.grad, np.ones((3, 4), dtype=w.grad.dtype))


def test_scaled_sigmoid_grad(f64):
    w = T.parameter(np.zeros((1, 1)))
    T.total(T.scale(T.sigmoid(w), 2.0)).backward()
    close(w.grad, [[0.5]])


def test_grad_check_identity_loss(f64):
    w = T.parameter(np.array([[0.3, -0.2]]), "w")
    report = T.grad_check(lambda: T.total(w), [w])
    assert report["w"] < 1e-9


def test_grad_check_sigmoid_chain(f64):
    w = T.parameter(np.array([[0.3, -0.7, 1.1]]), "w")
    report = T.grad_check(lambda: T.total(T.sigmoid(T.sigmoid(w))), [w], h=1e-4)
    assert report["w"] < 1e-6


def test_grad_accumulates_until_zeroed():
    w = T.parameter(np.ones((1, 2)))
    T.total(w).backward()
    T.total(w).backward()
    assert np.all(w.grad == 2.0)
    T.zero_grads([w])
    assert w.grad is None


def test_nonfinite_forward_raises():
    with pytest.raises((T.NonFiniteError, T.DomainError)):
        T.log(T.Tensor(np.array([[0.0]])))


def test_no_grad_records_nothing():
    w = T.parameter(np.ones((1, 2)))
    with T.no_grad():
        y = T.mul(w, w)
    assert not y.requires_grad


def test_elementwise_shape_mismatch():
    with pytest.raises(T.ShapeError):
        T.add(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((3, 2))))


def test_matmul_accumulates_in_float64():
    a = np.full((1, 4096), 1e-4, dtype=np.float32)
    b = np.ones((4096, 1), dtype=np.float32)
    out = T.matmul(T.Tensor(a), T.Tensor(b))
    assert out.dtype == np.float32
    assert abs(float(out.data[0, 0]) - float(np.float32(4096 * np.float64(np.float32(1e-4))))) < 1e-6


OPS = {
    "matmul": lambda a, b: T.matmul(a, T.transpose(b)),
    "add": T.add,
    "sub": T.sub,
    "mul": T.mul,
    "scale": lambda a, b: T.scale(a, 1.7),
    "relu": lambda a, b: T.relu(a),
    "sigmoid": lambda a, b: T.sigmoid(a),
    "softplus": lambda a, b: T.softplus(a),
    "log1p": lambda a, b: T.log1p(T.mul(a, a)),
    "exp": lambda a, b: T.exp(a),
    "log": lambda a, b: T.log(T.add(T.mul(a, a), T.Tensor(np.full(a.shape, 0.5)))),
    "log1mexp": lambda a, b: T.log1mexp(T.add(T.mul(a, a), T.Tensor(np.full(a.shape, 0.1)))),
    "softmax": lambda a, b: T.softmax_rows(a),
    "masked_softmax": lambda a, b: T.softmax_rows(a, np.tril(np.ones(a.shape, dtype=bool))),
    "transpose": lambda a, b: T.transpose(a),
    "reshape": lambda a, b: T.reshape(a, (2, 8)),
    "concat": lambda a, b: T.concat([a, b], axis=1),
    "rows": lambda a, b: T.rows(a, slice(1, 3)),
    "linear": lambda a, b: T.linear(a, b, T.Tensor(np.arange(4.0)[None, :])),
}


@pytest.mark.parametrize("op", sorted(OPS))
@pytest.mark.parametrize("seed", range(10))
def test_op_gradients_match_finite_differences(op, seed, f64):
    rng = np.random.default_rng(seed)
    a = T.parameter(rng.normal(size=(4, 4)), "a")
    b = T.parameter(rng.normal(size=(4, 4)), "b")
    # keep relu away from its kink
    a.data[np.abs(a.data) < 0.05] += 0.1
    weights = T.Tensor(rng.normal(size=OPS[op](a, b).shape))
    report = T.grad_check(lambda: T.total(T.mul(OPS[op](a, b), weights)), [a, b], h=1e-3)
    assert max(report.values()) <= 1e-4, report


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.integers(1, 5))
def test_softmax_rows_are_distributions(vals, reps):
    x = np.tile(np.array(vals), (reps, 1))
    out = T.softmax_rows(T.Tensor(x)).data
    assert np.all((out >= 0) & (out <= 1))
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)


def test_backward_is_deterministic(f64):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 5))
    grads = []
    for _ in range(2):
        w = T.parameter(x.copy())
        T.total(T.softmax_rows(T.matmul(w, w))).backward()
        grads.append(w.grad.copy())
    assert np.array_equal(grads[0], grads[1])
