import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphtax import nn
from graphtax.errors import InputError, NumericError
from graphtax.nn import AdamState, ParamStore, Tensor, adam_step, grad_check


def t(a, grad=False):
    return Tensor(np.atleast_2d(np.asarray(a, dtype=np.float64)), requires_grad=grad)


def test_forward_examples():
    assert nn.relu(t([-1.0, 0.0, 2.0])).data.tolist() == [[0, 0, 2]]
    sm = nn.row_softmax(t([[3.0, 3.0, 3.0, 3.0]])).data
    assert np.allclose(sm, 0.25) and math.isclose(sm.sum(), 1.0)
    x = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(nn.matmul(t(np.eye(2)), t(x)).data, x)


def test_batchnorm_examples():
    gamma, beta = t([[1.0]]), t([[0.0]])
    rm, rv = np.zeros(1), np.ones(1)
    out = nn.batchnorm(t([[1.0], [3.0]]), gamma, beta, rm, rv, train=True).data.ravel()
    assert np.allclose(out, [-1, 1], atol=1e-5)
    # running stats moved toward batch mean 2 and unbiased variance 2
    assert np.allclose(rm, [0.2]) and np.allclose(rv, [0.9 + 0.1 * 2.0])

    x = np.array([[0.3], [-1.2], [4.0]])
    out = nn.batchnorm(t(x), gamma, beta, np.zeros(1), np.ones(1), train=False).data
    assert np.allclose(out, x, atol=1e-4)

    shift = t([[0.7]])
    const = nn.batchnorm(t([[5.0]] * 4), gamma, shift, np.zeros(1), np.ones(1), train=True).data
    assert np.allclose(const, 0.7)


def test_cross_entropy_examples():
    assert nn.cross_entropy(t([[50.0, -50.0]]), [0]).item() < 1e-12
    for c in (2, 3, 7):
        assert math.isclose(nn.cross_entropy(t(np.zeros((4, c))), [0] * 4).item(), math.log(c))
    assert math.isclose(nn.cross_entropy(t([[0.0, 0.0]]), [0]).item(), 0.6931471805599453)
    with pytest.raises(InputError):
        nn.cross_entropy(t([[0.0, 0.0]]), [2])


def test_adam_examples():
    p = ParamStore()
    w = p.add("w", np.array([[1.5]]))
    state = AdamState(lr=0.1)
    adam_step(p, state)  # no gradient: unchanged
    assert w.data.tolist() == [[1.5]]

    p = ParamStore()
    w = p.add("w", np.array([[1.0]]))
    w.grad = np.array([[1.0]])
    adam_step(p, AdamState(lr=0.1))
    # m_hat = 1, v_hat = 1, step = lr * 1 / (1 + eps)
    assert math.isclose(p["w"].data[0, 0], 1.0 - 0.1 / (1 + 1e-8), rel_tol=1e-12)
    assert p["w"].grad is None

    p = ParamStore()
    a, b = p.add("a", np.array([[0.3, -0.2]])), p.add("b", np.array([[0.3, -0.2]]))
    state = AdamState(lr=0.01)
    for _ in range(3):
        a.grad = np.array([[0.5, -2.0]])
        b.grad = np.array([[0.5, -2.0]])
        adam_step(p, state)
        a, b = p["a"], p["b"]
    assert np.array_equal(a.data, b.data)


def test_backward_requires_scalar():
    with pytest.raises(InputError):
        t([[1.0, 2.0]], grad=True).backward()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_raises():
    with pytest.raises(NumericError):
        nn.scale(t([[1e308]]), 1e10)


def test_grad_check_quadratic_and_zero():
    p = ParamStore()
    w = p.add("w", np.random.default_rng(0).normal(size=(3, 2)))
    a = Tensor(np.random.default_rng(1).normal(size=(2, 3)))

    def quad():
        y = nn.matmul(a, p["w"])
        return nn.matmul(nn.matmul(Tensor(np.ones((1, 2))), nn.mul(y, y)), Tensor(np.ones((2, 1))))

    assert grad_check(quad, p, max_per_param=None) < 1e-7

    def zero():
        return nn.scale(nn.matmul(nn.matmul(Tensor(np.ones((1, 3))), p["w"]), Tensor(np.ones((2, 1)))), 0.0)

    zero().backward()
    assert np.all(w.grad == 0.0)
    p.zero_grad()


def _check(fn, *shapes, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    p = ParamStore()
    for i, shape in enumerate(shapes):
        p.add(f"x{i}", rng.normal(size=shape))

    def loss():
        out = fn(*[p[f"x{i}"] for i in range(len(shapes))])
        r = Tensor(np.random.default_rng(99).normal(size=out.shape))
        return nn.matmul(nn.matmul(Tensor(np.ones((1, out.shape[0]))), nn.mul(out, r)),
                         Tensor(np.ones((out.shape[1], 1))))

    assert grad_check(loss, p, tol=tol, max_per_param=None) < tol


SEG = np.array([0, 0, 1, 2, 2, 2])


@pytest.mark.parametrize("name,fn,shapes", [
    ("matmul", nn.matmul, [(3, 4), (4, 2)]),
    ("add", nn.add, [(3, 4), (3, 4)]),
    ("add_row", nn.add, [(3, 4), (1, 4)]),
    ("add_n", lambda a, b, c: nn.add_n(a, b, c), [(2, 3)] * 3),
    ("sub", nn.sub, [(3, 2), (3, 2)]),
    ("mul", nn.mul, [(3, 2), (3, 2)]),
    ("mul_row", nn.mul, [(3, 2), (1, 2)]),
    ("scale", lambda a: nn.scale(a, -1.7), [(2, 2)]),
    ("leaky", lambda a: nn.leaky_relu(a, 0.2), [(4, 3)]),
    ("softmax", nn.row_softmax, [(3, 5)]),
    ("spmm", lambda a: nn.spmm(sp.random(4, 3, density=0.6, random_state=1, format="csr"), a), [(3, 2)]),
    ("gather", lambda a: nn.gather_rows(a, np.array([2, 0, 0, 1])), [(3, 2)]),
    ("segsum", lambda a: nn.segment_sum(a, SEG, 3), [(6, 2)]),
    ("meanpool", lambda a: nn.row_mean_pool(a, SEG, 3), [(6, 2)]),
    ("segsoftmax", lambda a: nn.segment_softmax(a, SEG, 3), [(6, 2)]),
    ("bn_train", lambda a, g, b: nn.batchnorm(a, g, b, np.zeros(3), np.ones(3), True), [(5, 3), (1, 3), (1, 3)]),
    ("bn_eval", lambda a, g, b: nn.batchnorm(a, g, b, np.full(3, 0.3), np.full(3, 2.0), False),
     [(5, 3), (1, 3), (1, 3)]),
    ("ce", lambda a: nn.cross_entropy(a, [0, 2, 1, 2]), [(4, 3)]),
])
def test_primitive_gradients(name, fn, shapes):
    _check(fn, *shapes)


def test_relu_gradient_away_from_kink():
    p = ParamStore()
    p.add("x", np.array([[-1.0, 0.5, 2.0, -0.3]]))
    assert grad_check(lambda: nn.matmul(nn.relu(p["x"]), Tensor(np.ones((4, 1)))), p) < 1e-9


def test_segment_softmax_sums_to_one_per_segment():
    x = t(np.random.default_rng(3).normal(size=(6, 2)))
    out = nn.segment_softmax(x, SEG, 3).data
    sums = np.zeros((3, 2))
    np.add.at(sums, SEG, out)
    assert np.allclose(sums, 1.0)


def test_dropout_scales_and_masks():
    rng = np.random.default_rng(0)
    x = t(np.ones((200, 50)))
    y = nn.dropout(x, 0.5, rng).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05
    assert nn.dropout(x, 0.0, rng) is x


def test_intermediate_grads_are_released():
    a = t([[1.0, 2.0]], grad=True)
    mid = nn.scale(a, 2.0)
    loss = nn.matmul(mid, t([[1.0], [1.0]]))
    loss.backward()
    assert np.allclose(a.grad, 2.0) and mid.grad is None


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(-50, 50, allow_nan=False)))
def test_row_softmax_properties(x):
    out = nn.row_softmax(t(x)).data
    assert np.all(out >= 0)
    assert np.allclose(out.sum(axis=1), 1.0)
    shifted = nn.row_softmax(t(x + 7.0)).data
    assert np.allclose(out, shifted)
