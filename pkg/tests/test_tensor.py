import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hnmt import tensor as T
from hnmt.errors import ContractError, DimensionError, NumericError, VocabularyError
from hnmt.tensor import Tape, Tensor, grad_check


def rand(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0, scale, shape), requires_grad=True)


# ----------------------------------------------------------------- matmul


def test_matmul_identity_and_zero():
    B = Tensor(np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(T.matmul(Tensor(np.eye(2)), B).data, B.data)
    np.testing.assert_array_equal(T.matmul(B, Tensor(np.zeros((3, 4)))).data, np.zeros((2, 4)))


def test_matmul_hand_oracle():
    out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
    np.testing.assert_array_equal(out.data, [[17.0], [39.0]])


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_backward_rule():
    rng = np.random.default_rng(0)
    a, b = rand(rng, 3, 4), rand(rng, 4, 2)
    with Tape() as tape:
        out = T.total(T.matmul(a, b))
    tape.backward(out)
    g = np.ones((3, 2))
    np.testing.assert_allclose(a.grad, g @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ g)


# ---------------------------------------------------------------- softmax


@pytest.mark.parametrize("row, expected", [
    ([2.0, 2.0, 2.0], [1 / 3, 1 / 3, 1 / 3]),
    ([0.0, np.log(2.0)], [1 / 3, 2 / 3]),
    ([1000.0, 1000.0], [0.5, 0.5]),
])
def test_softmax_examples(row, expected):
    np.testing.assert_allclose(T.softmax_rows(Tensor([row])).data[0], expected, atol=1e-15)


def test_softmax_nan_is_numeric_error():
    with pytest.raises(NumericError):
        T.softmax_rows(Tensor([[0.0, np.nan]]))


def test_softmax_fully_masked_row():
    with pytest.raises(ContractError):
        T.softmax_rows(Tensor([[1.0, 2.0]]), mask=np.array([[0.0, 0.0]]))


def test_softmax_mask_zeroes_positions():
    p = T.softmax_rows(Tensor([[5.0, 1.0, 1.0]]), mask=np.array([[0.0, 1.0, 1.0]])).data
    np.testing.assert_allclose(p, [[0.0, 0.5, 0.5]])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-50, 50)), st.floats(-1e3, 1e3))
def test_softmax_rows_sum_and_shift(x, c):
    p = T.softmax_rows(Tensor(x)).data
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert (p >= 0).all()
    np.testing.assert_allclose(T.softmax_rows(Tensor(x + c)).data, p, atol=1e-12)


# ------------------------------------------------------------ elementwise


def test_elementwise_examples():
    assert T.elementwise("tanh", Tensor([0.0])).data[0] == 0.0
    assert T.elementwise("sigmoid", Tensor([0.0])).data[0] == 0.5
    np.testing.assert_array_equal(T.elementwise("concat", Tensor([1.0, 2.0]), Tensor([3.0])).data, [1, 2, 3])
    np.testing.assert_array_equal(T.elementwise("slice", Tensor([1.0, 2.0, 3.0]), start=1, stop=3).data, [2, 3])


def test_elementwise_rejects_broadcast():
    with pytest.raises(DimensionError):
        T.elementwise("add", Tensor(np.ones((2, 3))), Tensor(np.ones((1, 3))))
    with pytest.raises(DimensionError):
        T.mul(Tensor(np.ones(3)), Tensor(np.ones(4)))


def test_sigmoid_is_stable_for_large_inputs():
    with np.errstate(over="raise", invalid="raise"):
        s = T.sigmoid(Tensor([-800.0, 800.0])).data
    np.testing.assert_allclose(s, [0.0, 1.0])


def test_scalar_scale_is_the_only_broadcast():
    x = Tensor([1.0, 2.0])
    np.testing.assert_array_equal((x * 3.0).data, [3.0, 6.0])
    with pytest.raises(TypeError):
        x * np.ones(2)


# --------------------------------------------------------------- backward


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with Tape() as tape:
        loss = T.total(x)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_dot_gives_two_x():
    x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        loss = T.total(x * x)
    T.backward(tape, loss)
    np.testing.assert_array_equal(x.grad, 2 * x.data)


def test_backward_random_graph_matches_finite_differences():
    rng = np.random.default_rng(3)
    W = rand(rng, 4, 3)
    y = Tensor(rng.normal(size=(2, 4)))

    def f(x):
        return T.total(T.tanh(T.matmul(y, x)) * T.sigmoid(T.matmul(y, x)))

    assert grad_check(f, W) <= 1e-6


def test_backward_non_scalar_is_contract_error():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = T.tanh(x)
    with pytest.raises(ContractError):
        tape.backward(y)


def test_backward_loss_from_another_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape():
        loss = T.total(x)
    with Tape() as other:
        pass
    with pytest.raises(ContractError):
        other.backward(loss)


def test_backward_twice_doubles_grads():
    rng = np.random.default_rng(1)
    a, b = rand(rng, 2, 3), rand(rng, 3, 2)
    with Tape() as tape:
        loss = T.total(T.tanh(T.matmul(a, b)))
    tape.backward(loss)
    first_a, first_b = a.grad.copy(), b.grad.copy()
    tape.backward(loss)
    np.testing.assert_allclose(a.grad, 2 * first_a, rtol=1e-15)
    np.testing.assert_allclose(b.grad, 2 * first_b, rtol=1e-15)


def test_fan_out_accumulates():
    x = Tensor([2.0], requires_grad=True)
    with Tape() as tape:
        loss = T.total(x + x + x)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [3.0])


def test_untracked_ops_record_nothing():
    with Tape() as tape:
        T.tanh(Tensor(np.ones(3)))
    assert len(tape.nodes) == 0


def test_nodes_are_topological():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        y = T.tanh(x)
        T.total(T.matmul(y, y))
    seen = {id(x)}
    for node in tape.nodes:
        assert all(id(i) in seen for i in node.inputs if i.requires_grad)
        seen.add(id(node.output))


# -------------------------------------------------------------- rows/index


def test_take_rows_repeated_id_accumulates():
    table = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    with Tape() as tape:
        out = T.take_rows(table, [1, 1])
        loss = T.total(out)
    np.testing.assert_array_equal(out.data[0], out.data[1])
    tape.backward(loss)
    np.testing.assert_array_equal(table.grad, [[0, 0], [2, 2], [0, 0]])


def test_take_rows_bad_id_names_it():
    with pytest.raises(VocabularyError, match="7"):
        T.take_rows(Tensor(np.zeros((3, 2))), [0, 7])


# --------------------------------------------------------------- grad_check


def test_grad_check_sum_is_exact():
    rng = np.random.default_rng(0)
    assert grad_check(T.total, rand(rng, 3, 4)) <= 1e-10


def test_grad_check_cross_entropy():
    rng = np.random.default_rng(0)
    targets = np.array([0, 3, 2])
    assert grad_check(lambda x: T.cross_entropy(x, targets), rand(rng, 3, 5)) <= 1e-6


def test_grad_check_detects_a_wrong_rule():
    def bad_square(x):
        return T._emit("bad", (x,), x.data**2, lambda g: (g * x.data,))  # missing factor 2

    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    assert grad_check(lambda t: T.total(bad_square(t)), x) > 0.1


def test_cross_entropy_weights_and_value():
    logits = Tensor(np.log(np.array([[1.0, 1.0], [1.0, 3.0]])))
    loss = T.cross_entropy(logits, [0, 1], weights=np.array([1.0, 0.0]))
    assert loss.data == pytest.approx(np.log(2.0), abs=1e-15)


OPS = {
    "add": lambda a, b: T.add(a, b),
    "sub": lambda a, b: T.sub(a, b),
    "mul": lambda a, b: T.mul(a, b),
    "tanh": lambda a, b: T.tanh(a),
    "sigmoid": lambda a, b: T.sigmoid(a),
    "scale": lambda a, b: T.scale(a, -1.7),
    "concat": lambda a, b: T.concat([a, b], axis=0),
    "slice": lambda a, b: T.slice_axis(a, 1, 3, axis=1),
    "transpose": lambda a, b: T.transpose(a),
    "reshape": lambda a, b: T.reshape(a, (4, 3)),
    "stack": lambda a, b: T.stack([a, b], axis=1),
    "blend": lambda a, b: T.blend(a, b, np.array([1.0, 0.0, 1.0])),
    "softmax": lambda a, b: T.softmax_rows(a, mask=np.array([[1, 1, 0, 1]] * 3, dtype=float)),
    "dropout": lambda a, b: T.dropout_mask(a, np.array([[2.0, 0.0, 2.0, 2.0]] * 3)),
    "add_bias": lambda a, b: T.add_bias(a, T.reshape(T.slice_axis(b, 0, 1, axis=0), (4,))),
    "matmul": lambda a, b: T.matmul(a, T.transpose(b)),
    "bmm": lambda a, b: T.bmm(T.reshape(a, (3, 1, 4)), T.reshape(b, (3, 4, 1))),
    "take_rows": lambda a, b: T.take_rows(a, [2, 0, 2]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_every_op_passes_grad_check(name):
    rng = np.random.default_rng(len(name))
    a, b = rand(rng, 3, 4), rand(rng, 3, 4)
    weights = Tensor(rng.normal(size=OPS[name](a, b).shape))

    def through_a(x):
        return T.total(T.mul(OPS[name](x, b), weights))

    def through_b(x):
        return T.total(T.mul(OPS[name](a, x), weights))

    assert grad_check(through_a, a) <= 1e-5
    assert grad_check(through_b, b) <= 1e-5
