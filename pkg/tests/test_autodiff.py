"""Gradient checks for the autodiff core."""
import numpy as np
import pytest

from vpop.autodiff import (
    Adam,
    NonScalarLoss,
    SegmentOutOfRange,
    Tensor,
    absolute,
    backward,
    clip_global_norm,
    concat,
    cosine_lr,
    detach,
    div,
    gather_rows,
    gradcheck,
    matmul,
    relu,
    reshape,
    segment_reduce,
    sqrt,
    tmean,
    tsum,
)


def test_add_mul_scalar_chain():
    x = Tensor(3.0, requires_grad=True)
    y = x * x + 2.0 * x + 1.0
    backward(y)
    assert x.grad == pytest.approx(8.0)


def test_backward_accumulates():
    x = Tensor(2.0, requires_grad=True)
    y = x * x
    backward(y)
    backward(y)
    assert x.grad == pytest.approx(8.0)


def test_nonscalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(NonScalarLoss):
        backward(x * 2.0)


def test_broadcast_add_unbroadcasts():
    a = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.ones((1, 3)), requires_grad=True)
    c = Tensor(np.ones(3), requires_grad=True)
    loss = tsum(a + b + c)
    backward(loss)
    assert a.grad.shape == (4, 3)
    assert b.grad.shape == (1, 3)
    assert c.grad.shape == (3,)
    np.testing.assert_allclose(b.grad, 4.0 * np.ones((1, 3)))
    np.testing.assert_allclose(c.grad, 4.0 * np.ones(3))


def test_matmul_gradcheck():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    err = gradcheck(lambda: tsum(matmul(a, b) * matmul(a, b)), {"a": a, "b": b})
    assert err < 1e-7


def test_div_gradcheck():
    rng = np.random.default_rng(1)
    a = Tensor(rng.normal(size=(5,)) + 3.0, requires_grad=True)
    b = Tensor(rng.normal(size=(5,)) + 3.0, requires_grad=True)
    err = gradcheck(lambda: tsum(div(a, b)), {"a": a, "b": b})
    assert err < 1e-7


def test_relu_abs_sqrt_gradcheck():
    rng = np.random.default_rng(2)
    # keep every input away from the kinks
    x = Tensor(rng.normal(size=(6,)) + np.where(rng.normal(size=6) > 0, 2.0, -2.0),
               requires_grad=True)
    err = gradcheck(lambda: tsum(relu(x) + absolute(x)), {"x": x})
    assert err < 1e-7
    y = Tensor(rng.uniform(0.5, 4.0, size=(6,)), requires_grad=True)
    err = gradcheck(lambda: tsum(sqrt(y)), {"y": y})
    assert err < 1e-7


def test_mean_axis_grad():
    x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
    backward(tsum(tmean(x, axis=0)))
    np.testing.assert_allclose(x.grad, np.full((3, 4), 1.0 / 3.0))


def test_concat_and_reshape_gradcheck():
    rng = np.random.default_rng(3)
    a = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 3)), requires_grad=True)

    def loss():
        c = concat([a, b], axis=1)
        return tsum(c * c)

    err = gradcheck(loss, {"a": a, "b": b})
    assert err < 1e-7
    r = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    err = gradcheck(lambda: tsum(reshape(r, (12,)) * reshape(r, (12,))), {"r": r})
    assert err < 1e-7


def test_gather_rows_accumulates_duplicates():
    x = Tensor(np.eye(3), requires_grad=True)
    picked = gather_rows(x, [0, 0, 2])
    backward(tsum(picked))
    np.testing.assert_allclose(x.grad, np.array([[2.0, 2, 2], [0, 0, 0], [1, 1, 1]]))


def test_detach_blocks_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    y = detach(x * 2.0)
    z = x * y
    backward(tsum(z))
    np.testing.assert_allclose(x.grad, 2.0 * np.ones(3))


def test_segment_sum_unsorted_matches_loop():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(7, 3))
    ids = np.array([2, 0, 1, 2, 0, 2, 1])
    out = segment_reduce(Tensor(x), ids, 3, "sum")
    expect = np.zeros((3, 3))
    for row, s in zip(x, ids):
        expect[s] += row
    np.testing.assert_allclose(out.data, expect)


def test_segment_mean_empty_segment_zero():
    x = Tensor(np.ones((2, 2)))
    out = segment_reduce(x, [0, 0], 3, "mean")
    np.testing.assert_allclose(out.data, [[1, 1], [0, 0], [0, 0]])


def test_segment_max_ties_first_row():
    x = Tensor(np.array([[1.0, 5.0], [1.0, 2.0]]), requires_grad=True)
    out = segment_reduce(x, [0, 0], 1, "max")
    backward(tsum(out))
    # both rows tie in column 0; the earlier row takes the gradient
    np.testing.assert_allclose(x.grad, [[1.0, 1.0], [0.0, 0.0]])


def test_segment_min_gradcheck():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(8, 3)), requires_grad=True)
    ids = np.array([0, 1, 1, 0, 2, 2, 2, 0])

    def loss():
        red = segment_reduce(x, ids, 4, "min")
        return tsum(red * red)

    err = gradcheck(loss, {"x": x})
    assert err < 1e-7


def test_segment_reduce_gradcheck_all_modes():
    rng = np.random.default_rng(6)
    x = Tensor(rng.normal(size=(6, 2)), requires_grad=True)
    ids = np.array([1, 0, 1, 2, 0, 2])
    for mode in ("sum", "mean", "max", "min"):
        err = gradcheck(
            lambda m=mode: tsum(segment_reduce(x, ids, 3, m) *
                                segment_reduce(x, ids, 3, m)),
            {"x": x})
        assert err < 1e-7, mode


def test_segment_reduce_matches_loop_reference():
    rng = np.random.default_rng(11)
    for trial in range(20):
        n = int(rng.integers(0, 15))
        d = int(rng.integers(1, 4))
        n_seg = int(rng.integers(1, 6))
        # quantized values force ties
        x = np.round(rng.normal(size=(n, d)) * 2) / 2
        ids = rng.integers(0, n_seg, size=n)
        for mode in ("sum", "mean", "max", "min"):
            got = segment_reduce(Tensor(x), ids, n_seg, mode).data
            expect = np.zeros((n_seg, d))
            for s in range(n_seg):
                block = x[ids == s]
                if block.size == 0:
                    continue
                if mode == "sum":
                    expect[s] = block.sum(axis=0)
                elif mode == "mean":
                    expect[s] = block.mean(axis=0)
                elif mode == "max":
                    expect[s] = block.max(axis=0)
                else:
                    expect[s] = block.min(axis=0)
            np.testing.assert_allclose(got, expect, atol=1e-12,
                                       err_msg=f"{mode} trial {trial}")


def test_segment_max_unsorted_tie_goes_to_earliest_row():
    x = Tensor(np.array([[2.0], [7.0], [7.0], [1.0]]), requires_grad=True)
    ids = [1, 0, 0, 1]
    out = segment_reduce(x, ids, 2, "max")
    backward(tsum(out))
    np.testing.assert_allclose(out.data, [[7.0], [2.0]])
    np.testing.assert_allclose(x.grad, [[1.0], [1.0], [0.0], [0.0]])


def test_segment_out_of_range():
    x = Tensor(np.ones((2, 2)))
    with pytest.raises(SegmentOutOfRange):
        segment_reduce(x, [0, 3], 3, "sum")
    with pytest.raises(SegmentOutOfRange):
        segment_reduce(x, [-1, 0], 3, "sum")


def test_adam_converges_on_quadratic():
    w = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam({"w": w}, lr=0.1)
    for _ in range(400):
        opt.zero_grad()
        loss = tsum(w * w)
        backward(loss)
        opt.step()
    assert np.abs(w.data).max() < 1e-3


def test_adam_skips_missing_grads():
    w = Tensor(np.ones(2), requires_grad=True)
    u = Tensor(np.ones(2), requires_grad=True)
    opt = Adam({"w": w, "u": u}, lr=0.5)
    opt.zero_grad()
    backward(tsum(w * w))
    opt.step()
    np.testing.assert_allclose(u.data, np.ones(2))
    assert not np.allclose(w.data, np.ones(2))


def test_adam_state_roundtrip():
    w = Tensor(np.ones(3), requires_grad=True)
    opt = Adam({"w": w}, lr=0.05)
    for _ in range(3):
        opt.zero_grad()
        backward(tsum(w * w))
        opt.step()
    state = opt.state_dict()
    clone = Adam({"w": w}, lr=0.05)
    clone.load_state_dict(state)
    assert clone.t == 3
    np.testing.assert_allclose(clone.m["w"], opt.m["w"])
    np.testing.assert_allclose(clone.v["w"], opt.v["w"])


def test_clip_global_norm():
    a = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([3.0, 4.0])
    norm = clip_global_norm([a], max_norm=1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(a.grad, [0.6, 0.8])
    b = Tensor(np.zeros(2), requires_grad=True)
    b.grad = np.array([0.3, 0.4])
    norm = clip_global_norm([b], max_norm=1.0)
    assert norm == pytest.approx(0.5)
    np.testing.assert_allclose(b.grad, [0.3, 0.4])


def test_cosine_lr_endpoints_and_midpoint():
    assert cosine_lr(0, 100, 1e-3, 1e-5) == pytest.approx(1e-3)
    assert cosine_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-5)
    assert cosine_lr(50, 100, 1e-3, 1e-5) == pytest.approx((1e-3 + 1e-5) / 2)
    assert cosine_lr(200, 100, 1e-3, 1e-5) == pytest.approx(1e-5)
