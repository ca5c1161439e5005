import numpy as np
import pytest

from core import ops
from core.errors import InvalidArgumentError, NonFiniteError, ShapeError
from core.tensor import Tape, Tensor, backward, constant, parameter, set_debug_checks


def weighted_sum(out: Tensor, seed: int = 99) -> Tensor:
    w = np.random.default_rng(seed).normal(size=out.shape)
    return ops.sum_all(ops.scale(out, w))


def numeric_grad(build, tensor: Tensor, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(tensor.data)
    it = np.nditer(tensor.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = tensor.data[idx]
        tensor.data[idx] = orig + eps
        up = build().item()
        tensor.data[idx] = orig - eps
        down = build().item()
        tensor.data[idx] = orig
        grad[idx] = (up - down) / (2 * eps)
    return grad


def assert_gradients_match(build, tensors, tol: float = 1e-4):
    analytic = backward(build(), tensors)
    for t, a in zip(tensors, analytic):
        n = numeric_grad(build, t)
        rel = np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        assert rel < tol, f"{t.name}: relative error {rel:.2e}"


def naive_conv(x, w, b, stride, dilation, padding):
    c_out, c_in, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    ho = (x.shape[1] + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    wo = (x.shape[2] + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for r in range(ho):
            for c in range(wo):
                acc = b[o]
                for ci in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            acc += w[o, ci, i, j] * xp[ci, r * stride + i * dilation, c * stride + j * dilation]
                out[o, r, c] = acc
    return out


def test_conv_of_ones_sums_the_window():
    out = ops.conv2d(constant(np.ones((1, 3, 3))), constant(np.ones((1, 1, 3, 3))))
    assert out.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == 9.0


@pytest.mark.parametrize("stride, dilation, padding", [(1, 2, 0), (1, 2, 2), (2, 1, 1), (2, 2, 2)])
def test_conv_matches_naive_oracle(stride, dilation, padding):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = ops.conv2d(constant(x), constant(w), constant(b), stride=stride, dilation=dilation, padding=padding)
    np.testing.assert_allclose(out.data, naive_conv(x, w, b, stride, dilation, padding), atol=1e-12)


def test_conv_batched_matches_unbatched():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 2, 6, 7))
    w = constant(rng.normal(size=(4, 2, 3, 3)))
    batched = ops.conv2d(constant(x), w, padding=1)
    for n in range(3):
        np.testing.assert_allclose(batched.data[n], ops.conv2d(constant(x[n]), w, padding=1).data, atol=1e-12)


def test_conv_rejects_channel_mismatch_and_empty_output():
    with pytest.raises(ShapeError):
        ops.conv2d(constant(np.ones((2, 5, 5))), constant(np.ones((1, 3, 3, 3))))
    with pytest.raises(ShapeError):
        ops.conv2d(constant(np.ones((1, 3, 3))), constant(np.ones((1, 1, 3, 3))), dilation=2)
    with pytest.raises(InvalidArgumentError):
        ops.conv2d(constant(np.ones((1, 5, 5))), constant(np.ones((1, 1, 3, 3))), stride=0)


def test_pool_examples():
    x = constant(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    assert ops.pool2d(x, "max", 2).data[0, 0, 0] == 4.0
    assert ops.pool2d(x, "avg", 2).data[0, 0, 0] == 2.5
    with pytest.raises(InvalidArgumentError):
        ops.pool2d(x, "median", 2)
    with pytest.raises(ShapeError):
        ops.pool2d(x, "max", 3)


def test_max_pool_tie_sends_gradient_to_first_element():
    x = parameter(np.full((1, 2, 2), 5.0))
    (grad,) = backward(ops.sum_all(ops.pool2d(x, "max", 2)), [x])
    np.testing.assert_array_equal(grad, [[[1.0, 0.0], [0.0, 0.0]]])


def test_rectangular_pool_shapes():
    x = constant(np.arange(2 * 8 * 12, dtype=np.float64).reshape(2, 8, 12))
    assert ops.pool2d(x, "max", (2, 4)).shape == (2, 4, 3)
    assert ops.pool2d(x, "avg", (4, 2)).shape == (2, 2, 6)


def test_dense_example():
    x = constant(np.array([1.0, 2.0]))
    w = constant(np.array([[1.0, 0.0], [0.5, -1.0], [2.0, 2.0]]))
    out = ops.dense(x, w, constant(np.array([0.0, 1.0, -1.0])))
    np.testing.assert_allclose(out.data, [1.0, -0.5, 5.0])


def test_gru_holds_state_when_update_gate_saturates():
    rng = np.random.default_rng(2)
    hid = 4
    b_ih = np.zeros(3 * hid)
    b_ih[:hid] = 50.0
    h = rng.normal(size=(2, hid))
    out = ops.gru_cell(
        constant(rng.normal(size=(2, 3))), constant(h),
        constant(rng.normal(size=(3 * hid, 3))), constant(rng.normal(size=(3 * hid, hid))),
        constant(b_ih), constant(np.zeros(3 * hid)),
    )
    np.testing.assert_allclose(out.data, h, atol=1e-12)


def test_gru_matches_gate_equations():
    rng = np.random.default_rng(3)
    hid, d = 3, 2
    x, h = rng.normal(size=d), rng.normal(size=hid)
    w_ih, w_hh = rng.normal(size=(3 * hid, d)), rng.normal(size=(3 * hid, hid))
    b_ih, b_hh = rng.normal(size=3 * hid), rng.normal(size=3 * hid)

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    gi, gh = w_ih @ x + b_ih, w_hh @ h + b_hh
    z = sig(gi[:hid] + gh[:hid])
    r = sig(gi[hid:2 * hid] + gh[hid:2 * hid])
    n = np.tanh(gi[2 * hid:] + r * gh[2 * hid:])
    expected = (1 - z) * n + z * h
    out = ops.gru_cell(*(constant(a) for a in (x, h, w_ih, w_hh, b_ih, b_hh)))
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_l1_loss_example():
    pred = parameter(np.array([2.0, 0.0]))
    loss = ops.l1_loss(pred, np.array([1.0, 1.0]))
    assert loss.item() == 1.0
    (grad,) = backward(loss, [pred])
    np.testing.assert_array_equal(grad, [0.5, -0.5])


# finite-difference checks, all in float64

def test_conv_gradients():
    rng = np.random.default_rng(10)
    x = parameter(rng.normal(size=(2, 2, 6, 6)), "x")
    w = parameter(rng.normal(size=(3, 2, 3, 3)), "w")
    b = parameter(rng.normal(size=3), "b")
    assert_gradients_match(lambda: weighted_sum(ops.conv2d(x, w, b, stride=2, dilation=2, padding=2)), [x, w, b])


@pytest.mark.parametrize("kind", ["max", "avg"])
def test_pool_gradients(kind):
    x = parameter(np.random.default_rng(11).normal(size=(2, 3, 4, 8)), "x")
    assert_gradients_match(lambda: weighted_sum(ops.pool2d(x, kind, (2, 4))), [x])


def test_pointwise_and_standardize_gradients():
    rng = np.random.default_rng(12)
    x = parameter(rng.normal(size=(2, 3, 4, 4)), "x")
    w = parameter(rng.normal(size=(5, 3)), "w")
    b = parameter(rng.normal(size=5), "b")
    assert_gradients_match(lambda: weighted_sum(ops.standardize(ops.pointwise_conv(x, w, b))), [x, w, b])


def test_global_pool_and_dense_gradients():
    rng = np.random.default_rng(13)
    x = parameter(rng.normal(size=(2, 3, 4, 5)), "x")
    w = parameter(rng.normal(size=(4, 3)), "w")
    b = parameter(rng.normal(size=4), "b")
    assert_gradients_match(lambda: weighted_sum(ops.tanh(ops.dense(ops.global_avg_pool(x), w, b))), [x, w, b])


def test_gru_gradients():
    rng = np.random.default_rng(14)
    hid = 4
    tensors = [
        parameter(rng.normal(size=(2, 3)), "x"),
        parameter(rng.normal(size=(2, hid)), "h"),
        parameter(rng.normal(size=(3 * hid, 3)) * 0.5, "w_ih"),
        parameter(rng.normal(size=(3 * hid, hid)) * 0.5, "w_hh"),
        parameter(rng.normal(size=3 * hid), "b_ih"),
        parameter(rng.normal(size=3 * hid), "b_hh"),
    ]
    assert_gradients_match(lambda: weighted_sum(ops.gru_cell(*tensors)), tensors)


def test_elementwise_concat_and_slice_gradients():
    rng = np.random.default_rng(15)
    a = parameter(rng.normal(size=(3, 4)), "a")
    b = parameter(rng.normal(size=(3, 2)), "b")

    def build():
        joined = ops.concat([ops.relu(a), ops.sigmoid(b), constant(np.ones((3, 1)))], axis=-1)
        return weighted_sum(ops.take_columns(joined, 1, 6)) + ops.mean(ops.tanh(a))

    assert_gradients_match(build, [a, b])


def test_l1_loss_gradient():
    pred = parameter(np.random.default_rng(16).normal(size=(4, 6)), "pred")
    target = np.random.default_rng(17).normal(size=(4, 6))
    assert_gradients_match(lambda: ops.l1_loss(pred, target), [pred])


def test_route_by_index_masks_unselected_rows():
    rng = np.random.default_rng(18)
    heads = [parameter(rng.normal(size=(4, 2)), f"head{k}") for k in range(3)]
    index = np.array([2, 0, 2, 1])
    out = ops.route_by_index(heads, index)
    np.testing.assert_array_equal(out.data, np.stack([heads[i].data[n] for n, i in enumerate(index)]))
    grads = backward(ops.sum_all(out), heads)
    for k, g in enumerate(grads):
        np.testing.assert_array_equal(g, np.where((index == k)[:, None], 1.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        ops.route_by_index(heads, np.array([0, 1, 3, 0]))


def test_backward_returns_zeros_for_unused_parameters():
    used = parameter(np.array([1.0, 2.0]), "used")
    unused = parameter(np.array([[3.0]]), "unused")
    grads = backward(ops.sum_all(ops.scale(used, 3.0)), {"used": used, "unused": unused})
    np.testing.assert_array_equal(grads["used"], [3.0, 3.0])
    np.testing.assert_array_equal(grads["unused"], [[0.0]])


def test_backward_can_run_twice_with_seed():
    x = parameter(np.array([0.5, -1.0]))
    out = ops.tanh(x)
    g1 = backward(out, [x], seed=np.array([1.0, 0.0]))[0]
    g2 = backward(out, [x], seed=np.array([2.0, 0.0]))[0]
    np.testing.assert_allclose(g2, 2 * g1)
    assert g1[1] == 0.0


def test_tape_orders_parents_before_children():
    x = parameter(np.ones(3), "x")
    y = ops.relu(x)
    z = ops.add(y, ops.scale(x, 2.0))
    loss = ops.sum_all(z)
    tape = Tape.record(loss)
    position = {id(n): k for k, n in enumerate(tape.nodes)}
    for node in tape.nodes:
        for parent in node._parents:
            if parent.requires_grad:
                assert position[id(parent)] < position[id(node)]
    assert tape.nodes[-1] is loss


def test_constants_record_no_graph():
    out = ops.relu(constant(np.array([-1.0, 2.0])))
    assert not out.requires_grad
    assert out._parents == ()


def test_debug_checks_flag_non_finite_values():
    set_debug_checks(True)
    try:
        with pytest.raises(NonFiniteError):
            ops.add_const(constant(np.ones(2)), np.inf)
    finally:
        set_debug_checks(False)
    assert np.isinf(ops.add_const(constant(np.ones(2)), np.inf).data).all()


def test_add_requires_equal_shapes():
    with pytest.raises(ShapeError):
        ops.add(constant(np.ones(2)), constant(np.ones(3)))
