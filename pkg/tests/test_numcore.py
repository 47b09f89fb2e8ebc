"""Autodiff core: oracle checks for forward values, finite-difference checks
for every gradient path, optimizer recurrence, schedules, checkpoint format."""

import math

import numpy as np
import pytest

from adaaug import numcore as nc
from adaaug.errors import (
    CheckpointError,
    ConfigurationError,
    ContractError,
    RangeError,
    ShapeError,
)


def numeric_grad(fn, x, h=1e-5):
    """Central finite differences of a scalar-valued fn at x, elementwise."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fn()
        flat[i] = orig - h
        lo = fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return g


def assert_grad_close(analytic, numeric, rel=1e-4):
    scale = np.maximum(np.abs(numeric), 1.0)
    np.testing.assert_array_less(np.abs(analytic - numeric) / scale, rel)


# ---------------------------------------------------------------- forward values


def test_linear_identity_input():
    x = nc.Array(np.eye(2))
    w = nc.Array([[3.0, 0.0], [0.0, 5.0]])
    b = nc.Array([0.0, 0.0])
    np.testing.assert_array_equal(nc.linear(x, w, b).data, [[3.0, 0.0], [0.0, 5.0]])


def test_linear_direct_substitution():
    out = nc.linear(nc.Array([[1.0, 2.0]]), nc.Array([[1.0], [1.0]]), nc.Array([0.5]))
    assert out.data[0, 0] == pytest.approx(3.5)


def test_linear_matches_triple_loop():
    rng = np.random.default_rng(7)
    x, w, b = rng.normal(size=(4, 8)), rng.normal(size=(8, 3)), rng.normal(size=3)
    out = nc.linear(nc.Array(x), nc.Array(w), nc.Array(b)).data
    want = np.zeros((4, 3))
    for i in range(4):
        for o in range(3):
            acc = b[o]
            for k in range(8):
                acc += x[i, k] * w[k, o]
            want[i, o] = acc
    np.testing.assert_allclose(out, want, rtol=0, atol=1e-12)


def test_linear_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as err:
        nc.linear(nc.Array(np.zeros((2, 3))), nc.Array(np.zeros((4, 5))), nc.Array(np.zeros(5)))
    assert "(2, 3)" in str(err.value) and "(4, 5)" in str(err.value)


def test_conv_all_ones():
    out = nc.conv2d(nc.Array(np.ones((1, 1, 3, 3))), nc.Array(np.ones((1, 1, 3, 3))))
    assert out.data.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == pytest.approx(9.0)


def test_conv_delta_kernel_is_identity():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 1, 5, 5))
    k = np.zeros((1, 1, 3, 3))
    k[0, 0, 1, 1] = 1.0
    out = nc.conv2d(nc.Array(x), nc.Array(k), stride=1, padding=1)
    np.testing.assert_allclose(out.data, x, atol=1e-15)


def test_conv_matches_six_loop_oracle():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(2, 2, 5, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    out = nc.conv2d(nc.Array(x), nc.Array(k)).data
    want = np.zeros((2, 3, 3, 3))
    for b in range(2):
        for f in range(3):
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for c in range(2):
                        for u in range(3):
                            for v in range(3):
                                acc += x[b, c, i + u, j + v] * k[f, c, u, v]
                    want[b, f, i, j] = acc
    np.testing.assert_allclose(out, want, rtol=0, atol=1e-12)


def test_conv_strided_matches_loop():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(1, 2, 7, 7))
    k = rng.normal(size=(2, 2, 3, 3))
    out = nc.conv2d(nc.Array(x), nc.Array(k), stride=2, padding=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    want = np.zeros((1, 2, 4, 4))
    for f in range(2):
        for i in range(4):
            for j in range(4):
                patch = xp[0, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3]
                want[0, f, i, j] = (patch * k[f]).sum()
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_conv_non_integral_extent_rejected():
    with pytest.raises(ConfigurationError):
        nc.conv2d(nc.Array(np.zeros((1, 1, 6, 6))), nc.Array(np.zeros((1, 1, 3, 3))), stride=2)


def test_cross_entropy_uniform_logits():
    _, per = nc.cross_entropy(nc.Array(np.zeros((4, 10))), np.zeros(4, dtype=int))
    np.testing.assert_allclose(per.data, math.log(10.0), atol=1e-12)


def test_cross_entropy_saturated():
    logits = np.zeros((1, 5))
    logits[0, 2] = 1000.0
    mean, _ = nc.cross_entropy(nc.Array(logits), np.array([2]))
    assert abs(mean.item()) < 1e-12


def test_cross_entropy_matches_logsumexp_oracle():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(3, 4)) * 3
    y = rng.integers(0, 4, size=3)
    mean, per = nc.cross_entropy(nc.Array(z), y)
    want = np.array(
        [math.log(np.exp(z[b] - z[b].max()).sum()) + z[b].max() - z[b, y[b]] for b in range(3)]
    )
    np.testing.assert_allclose(per.data, want, atol=1e-12)
    assert mean.item() == pytest.approx(want.mean(), abs=1e-12)


def test_cross_entropy_label_out_of_range():
    with pytest.raises(IndexError):
        nc.cross_entropy(nc.Array(np.zeros((2, 3))), np.array([0, 3]))


def test_cross_entropy_positive_unless_certain():
    rng = np.random.default_rng(9)
    for _ in range(50):
        z = rng.normal(size=(6, 10)) * 4
        y = rng.integers(0, 10, size=6)
        _, per = nc.cross_entropy(nc.Array(z), y)
        assert (per.data > 0).all()


# ---------------------------------------------------------------- backward


def test_backward_sum_gives_ones():
    p = nc.Array(np.arange(6.0).reshape(2, 3), requires_grad=True)
    nc.reduce_sum(p).backward()
    np.testing.assert_array_equal(p.grad, np.ones((2, 3)))


def test_backward_zero_multiplier_gives_zeros():
    p = nc.Array(np.arange(4.0), requires_grad=True)
    nc.reduce_sum(p * 0.0).backward()
    np.testing.assert_array_equal(p.grad, np.zeros(4))


def test_backward_requires_scalar_root():
    p = nc.Array(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (p * 2.0).backward()


def test_backward_accumulates_on_repeat():
    p = nc.Array(np.ones(3), requires_grad=True)
    root = nc.reduce_sum(p * p)
    root.backward()
    first = p.grad.copy()
    root.backward()
    np.testing.assert_allclose(p.grad, 2 * first)


def test_no_grad_blocks_recording():
    p = nc.Array(np.ones(3), requires_grad=True)
    with nc.no_grad():
        out = nc.reduce_sum(p * 3.0)
    assert out._parents == ()
    out.backward()  # walks an empty record
    assert p.grad is None


def test_shared_subexpression_accumulates():
    p = nc.Array(np.array([3.0]), requires_grad=True)
    # d/dp (p*p) = 2p through two uses of the same node
    nc.reduce_sum(p * p).backward()
    assert p.grad[0] == pytest.approx(6.0)


GRAD_CASES = 25


@pytest.mark.parametrize("trial", range(GRAD_CASES))
def test_composed_network_gradients_match_fd(trial):
    rng = np.random.default_rng(100 + trial)
    x = rng.normal(size=(2, 2, 6, 6))
    k1 = nc.Array(rng.normal(size=(3, 2, 3, 3)) * 0.5, requires_grad=True)
    w = nc.Array(rng.normal(size=(12, 4)) * 0.5, requires_grad=True)
    b = nc.Array(rng.normal(size=4) * 0.5, requires_grad=True)
    labels = rng.integers(0, 4, size=2)

    def forward():
        h = nc.relu(nc.conv2d(nc.Array(x), k1))
        h = nc.maxpool2d(h, 2)
        h = nc.reshape(h, (2, 12))
        logits = nc.linear(h, w, b)
        mean, _ = nc.cross_entropy(logits, labels)
        return mean

    loss = forward()
    loss.backward()
    for p in (k1, w, b):
        num = numeric_grad(lambda: forward().item(), p.data)
        assert_grad_close(p.grad, num)


def test_conv_input_gradient_matches_fd():
    rng = np.random.default_rng(42)
    x = nc.Array(rng.normal(size=(1, 2, 5, 5)), requires_grad=True)
    k = nc.Array(rng.normal(size=(2, 2, 3, 3)), requires_grad=True)

    def forward():
        return nc.reduce_sum(nc.sigmoid(nc.conv2d(x, k, stride=2, padding=1)))

    forward().backward()
    for p in (x, k):
        num = numeric_grad(lambda: forward().item(), p.data)
        assert_grad_close(p.grad, num)


# ---------------------------------------------------------------- optimizer


def test_sgd_plain_reduction():
    p = nc.Array(np.array([1.0, 2.0]), requires_grad=True)
    p.grad = np.array([0.5, -0.5])
    nc.SGD([p], lr=0.1).step()
    np.testing.assert_allclose(p.data, [0.95, 2.05], atol=1e-15)
    assert p.grad is None


def test_sgd_zero_grad_fixed_point():
    p = nc.Array(np.array([1.0]), requires_grad=True)
    opt = nc.SGD([p], lr=0.1, momentum=0.9)
    for _ in range(5):
        p.grad = np.zeros(1)
        opt.step()
    assert p.data[0] == 1.0


def test_sgd_two_step_nesterov_recurrence():
    # Hand-unrolled: v1 = g1, p1 = p0 - lr*(g1 + mu*g1)
    #                v2 = mu*g1 + g2, p2 = p1 - lr*(g2 + mu*v2)
    p0, g1, g2, lr, mu = 2.0, 0.3, -0.7, 0.1, 0.9
    p = nc.Array(np.array([p0]), requires_grad=True)
    opt = nc.SGD([p], lr=lr, momentum=mu)
    p.grad = np.array([g1])
    opt.step()
    p1 = p0 - lr * (g1 + mu * g1)
    assert p.data[0] == pytest.approx(p1, abs=1e-12)
    p.grad = np.array([g2])
    opt.step()
    v2 = mu * g1 + g2
    p2 = p1 - lr * (g2 + mu * v2)
    assert p.data[0] == pytest.approx(p2, abs=1e-12)


def test_sgd_weight_decay_enters_gradient():
    p = nc.Array(np.array([2.0]), requires_grad=True)
    p.grad = np.zeros(1)
    nc.SGD([p], lr=0.1, weight_decay=0.5).step()
    # g_eff = 0 + 0.5*2 = 1; p <- 2 - 0.1*1
    assert p.data[0] == pytest.approx(1.9, abs=1e-15)


def test_sgd_missing_grad_rejected():
    p = nc.Array(np.ones(1), requires_grad=True)
    with pytest.raises(ContractError):
        nc.SGD([p], lr=0.1).step()


def test_sgd_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(77)
        w = nc.Array(rng.normal(size=(3, 2)), requires_grad=True)
        b = nc.Array(np.zeros(2), requires_grad=True)
        opt = nc.SGD([w, b], lr=0.05, momentum=0.9, weight_decay=1e-4)
        for _ in range(20):
            x = nc.Array(rng.normal(size=(4, 3)))
            y = rng.integers(0, 2, size=4)
            loss, _ = nc.cross_entropy(nc.linear(x, w, b), y)
            loss.backward()
            opt.step()
        return w.data.copy(), b.data.copy()

    w1, b1 = run()
    w2, b2 = run()
    assert (w1 == w2).all() and (b1 == b2).all()


# ---------------------------------------------------------------- schedules


def test_cosine_endpoints():
    sched = nc.LrSchedule.cosine(0.1, 300)
    assert nc.schedule_lr(sched, 0) == pytest.approx(0.1)
    assert nc.schedule_lr(sched, 300) == pytest.approx(0.0, abs=1e-18)


def test_cosine_nonincreasing():
    sched = nc.LrSchedule.cosine(0.1, 50)
    rates = [sched.rate(t) for t in range(51)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_multi_step_values():
    sched = nc.LrSchedule.multi_step(0.1, 300, milestones=(60, 120, 160), decay_factor=0.2)
    assert sched.rate(0) == pytest.approx(0.1)
    assert sched.rate(59) == pytest.approx(0.1)
    assert sched.rate(60) == pytest.approx(0.02)
    assert sched.rate(121) == pytest.approx(0.004)
    assert sched.rate(200) == pytest.approx(0.0008)


def test_schedule_epoch_out_of_range():
    sched = nc.LrSchedule.cosine(0.1, 10)
    with pytest.raises(RangeError):
        sched.rate(11)
    with pytest.raises(RangeError):
        sched.rate(-1)


def test_schedule_bad_kind_rejected():
    with pytest.raises(ConfigurationError):
        nc.LrSchedule("sawtooth", 0.1, 10)


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    tensors = {
        "conv.w": rng.normal(size=(2, 1, 3, 3)),
        "fc.b": rng.normal(size=7),
        "scalar": np.float64(3.25),
    }
    path = tmp_path / "net.ckpt"
    nc.save_tensors(path, tensors)
    back = nc.load_tensors(path)
    assert list(back) == list(tensors)
    for name in tensors:
        np.testing.assert_array_equal(back[name], np.asarray(tensors[name]))


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 16)
    with pytest.raises(CheckpointError) as err:
        nc.load_tensors(path)
    assert "offset 0" in str(err.value)


def test_checkpoint_truncation_detected(tmp_path):
    path = tmp_path / "t.ckpt"
    nc.save_tensors(path, {"w": np.ones((4, 4))})
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(CheckpointError) as err:
        nc.load_tensors(path)
    assert "offset" in str(err.value)
