"""Neural core: every layer against central finite differences.

The oracle perturbs each checked parameter by +-eps and compares the
slope to the analytic gradient.  float32 forward math leaves a noise
floor around 1e-4 on the slope, so the relative-error denominator is
floored; gradients of honest magnitude still face a true 1e-2 check.
"""

import numpy as np
import pytest

from mapsmith import nn
from mapsmith.errors import DataError
from mapsmith.nn import (
    ParamStore,
    Tensor,
    add,
    avgpool2,
    concat,
    conv2d,
    cross_entropy_loss,
    group_norm,
    load_model,
    matmul,
    mean,
    mse_loss,
    mul,
    reshape,
    silu,
    softmax,
    sum_axis,
    upsample_nearest2,
)
from mapsmith.nn.layers import (
    Conv2d,
    CrossAttention,
    Dense,
    GroupNorm,
    ResidualBlock,
    TimeEmbed,
    sinusoidal_time_embed,
)
from mapsmith.nn.serialize import save_model
from mapsmith.rng import make_rng

EPS = 1e-3
TOL = 1e-2


def _sample_indices(rng, array, limit=24):
    flat = array.size
    if flat <= limit:
        return list(range(flat))
    return sorted(rng.choice(flat, size=limit, replace=False).tolist())


def check_gradients(build_loss, tensors, seed=0):
    """Analytic vs central-difference gradients on sampled components."""
    for tensor in tensors:
        tensor.grad = None
    loss = build_loss()
    loss.backward()
    grads = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    rng = make_rng(seed, index=9)
    for tensor, grad in zip(tensors, grads):
        flat = tensor.data.reshape(-1)
        for idx in _sample_indices(rng, tensor.data):
            original = flat[idx]
            flat[idx] = original + EPS
            lo_plus = build_loss().item()
            flat[idx] = original - EPS
            lo_minus = build_loss().item()
            flat[idx] = original
            fd = (lo_plus - lo_minus) / (2 * EPS)
            analytic = float(grad.reshape(-1)[idx])
            rel = abs(analytic - fd) / max(abs(analytic) + abs(fd), 1e-2)
            assert rel < TOL, f"grad mismatch at {idx}: analytic={analytic}, fd={fd}"


def _randn(rng, *shape):
    return rng.normal(0.0, 0.5, size=shape).astype(np.float32)


def test_dense_gradients():
    rng = make_rng(1)
    store = ParamStore()
    layer = Dense(store, "fc", 5, 3, rng)
    x = Tensor(_randn(rng, 4, 5), requires_grad=True)
    target = _randn(rng, 4, 3)
    check_gradients(lambda: mse_loss(layer(x), target), [x, layer.w, layer.b])


def test_dense_identity_initialization_is_identity():
    store = ParamStore()
    layer = Dense(store, "fc", 4, 4, make_rng(0))
    layer.w.data = np.eye(4, dtype=np.float32)
    x = _randn(make_rng(2), 3, 4)
    assert np.allclose(layer(Tensor(x)).data, x)


def test_conv3x3_gradients():
    rng = make_rng(3)
    store = ParamStore()
    layer = Conv2d(store, "conv", 3, 4, rng)
    x = Tensor(_randn(rng, 2, 3, 4, 4), requires_grad=True)
    target = _randn(rng, 2, 4, 4, 4)
    check_gradients(lambda: mse_loss(layer(x), target), [x, layer.w, layer.b])


def test_conv1x1_gradients():
    rng = make_rng(4)
    store = ParamStore()
    layer = Conv2d(store, "conv", 4, 2, rng, kernel=1)
    x = Tensor(_randn(rng, 2, 4, 3, 3), requires_grad=True)
    target = _randn(rng, 2, 2, 3, 3)
    check_gradients(lambda: mse_loss(layer(x), target), [x, layer.w, layer.b])


def test_conv_constant_input_sum_one_kernel():
    store = ParamStore()
    layer = Conv2d(store, "conv", 1, 1, make_rng(0))
    layer.w.data = np.full((1, 1, 3, 3), 1.0 / 9.0, dtype=np.float32)
    x = Tensor(np.full((1, 1, 6, 6), 2.5, dtype=np.float32))
    out = layer(x).data
    assert np.allclose(out[0, 0, 1:-1, 1:-1], 2.5, atol=1e-6)


def test_group_norm_gradients():
    rng = make_rng(5)
    store = ParamStore()
    layer = GroupNorm(store, "gn", 8, groups=4)
    x = Tensor(_randn(rng, 2, 8, 3, 3), requires_grad=True)
    target = _randn(rng, 2, 8, 3, 3)
    check_gradients(lambda: mse_loss(layer(x), target), [x, layer.gamma, layer.beta])


def test_silu_softmax_elementwise_gradients():
    rng = make_rng(6)
    x = Tensor(_randn(rng, 3, 7), requires_grad=True)
    target = _randn(rng, 3, 7)
    check_gradients(lambda: mse_loss(silu(x), target), [x])
    check_gradients(lambda: mse_loss(softmax(x, axis=1), target), [x])


def test_upsample_and_avgpool_gradients():
    rng = make_rng(7)
    x = Tensor(_randn(rng, 2, 3, 4, 4), requires_grad=True)
    up_target = _randn(rng, 2, 3, 8, 8)
    down_target = _randn(rng, 2, 3, 2, 2)
    check_gradients(lambda: mse_loss(upsample_nearest2(x), up_target), [x])
    check_gradients(lambda: mse_loss(avgpool2(x), down_target), [x])


def test_upsample_forward_repeats():
    x = Tensor(np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2))
    out = upsample_nearest2(x).data
    assert out.shape == (1, 1, 4, 4)
    expected = [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]
    assert np.array_equal(out[0, 0], expected)


def test_concat_mul_reshape_sum_gradients():
    rng = make_rng(8)
    a = Tensor(_randn(rng, 2, 3), requires_grad=True)
    b = Tensor(_randn(rng, 2, 5), requires_grad=True)
    target = _randn(rng, 2, 8)

    def build():
        joined = concat([a, b], axis=1)
        scaled = mul(joined, 1.5)
        return mse_loss(reshape(scaled, (2, 8)), target)

    check_gradients(build, [a, b])
    c = Tensor(_randn(rng, 2, 4, 3, 3), requires_grad=True)
    check_gradients(lambda: mean(sum_axis(c, axis=1, keepdims=True)), [c])


def test_transpose_and_exp_gradients():
    rng = make_rng(19)
    a = Tensor(_randn(rng, 3, 5), requires_grad=True)
    target = _randn(rng, 5, 3)
    check_gradients(lambda: mse_loss(nn.transpose2d(a), target), [a])
    b = Tensor(_randn(rng, 4, 4), requires_grad=True)
    check_gradients(lambda: mse_loss(nn.exp(b), np.zeros((4, 4), dtype=np.float32)), [b])
    assert np.array_equal(nn.transpose2d(Tensor(np.eye(3))).data, np.eye(3, dtype=np.float32))
    with pytest.raises(DataError):
        nn.transpose2d(Tensor(np.zeros((2, 2, 2))))


def test_l2_normalize_gradients():
    rng = make_rng(21)
    a = Tensor(_randn(rng, 3, 6), requires_grad=True)
    target = _randn(rng, 3, 6)
    check_gradients(lambda: mse_loss(nn.l2_normalize(a, axis=1), target), [a])
    out = nn.l2_normalize(a, axis=1)
    norms = np.sqrt((out.data ** 2).sum(axis=1))
    assert np.allclose(norms, 1.0, atol=1e-5)


def test_broadcast_add_gradients():
    rng = make_rng(9)
    x = Tensor(_randn(rng, 2, 4, 3, 3), requires_grad=True)
    bias = Tensor(_randn(rng, 1, 4, 1, 1), requires_grad=True)
    target = _randn(rng, 2, 4, 3, 3)
    check_gradients(lambda: mse_loss(add(x, bias), target), [x, bias])


def test_residual_block_with_time_gradients():
    rng = make_rng(10)
    store = ParamStore()
    block = ResidualBlock(store, "res", 4, 8, rng, time_dim=6)
    x = Tensor(_randn(rng, 2, 4, 4, 4), requires_grad=True)
    temb = Tensor(_randn(rng, 2, 6), requires_grad=True)
    target = _randn(rng, 2, 8, 4, 4)
    params = [store[name] for name in store.names()]
    check_gradients(lambda: mse_loss(block(x, temb), target), [x, temb] + params)


def test_cross_attention_gradients_and_collapse():
    rng = make_rng(11)
    store = ParamStore()
    attn = CrossAttention(store, "attn", 4, 6, rng)
    x = Tensor(_randn(rng, 2, 4, 3, 3), requires_grad=True)
    cond = Tensor(_randn(rng, 2, 6), requires_grad=True)
    target = _randn(rng, 2, 4, 3, 3)
    params = [store[name] for name in store.names()]
    check_gradients(lambda: mse_loss(attn(x, cond), target), [x, cond] + params)
    # One conditioning token: softmax weight is 1, so the block reduces to
    # x + proj(v) with v broadcast over the grid.
    values = attn.v(cond)
    broadcast = np.broadcast_to(values.data[:, :, None, None], x.data.shape)
    expected = x.data + attn.proj(Tensor(broadcast.copy())).data
    assert np.allclose(attn(x, cond).data, expected, atol=1e-6)


def test_time_embed_gradients_and_shape():
    rng = make_rng(12)
    store = ParamStore()
    embed = TimeEmbed(store, "time", 8, rng)
    out = embed(np.array([1, 5, 17]))
    assert out.shape == (3, 8)
    params = [store[name] for name in store.names()]
    target = _randn(rng, 3, 8)
    check_gradients(lambda: mse_loss(embed(np.array([1, 5, 17])), target), params)
    raw = sinusoidal_time_embed(np.array([0]), 8).data
    assert np.allclose(raw[0, :4], 0.0) and np.allclose(raw[0, 4:], 1.0)


def test_mse_loss_values_and_gradient():
    pred = Tensor(np.ones((2, 3), dtype=np.float32), requires_grad=True)
    assert mse_loss(pred, np.ones((2, 3), dtype=np.float32)).item() == 0.0
    loss = mse_loss(pred, np.zeros((2, 3), dtype=np.float32))
    assert loss.item() == pytest.approx(1.0)
    loss.backward()
    assert np.allclose(pred.grad, 2.0 / 6.0)
    rng = make_rng(13)
    p = Tensor(_randn(rng, 3, 4), requires_grad=True)
    check_gradients(lambda: mse_loss(p, np.zeros((3, 4), dtype=np.float32)), [p])


def test_cross_entropy_gradients_and_value():
    rng = make_rng(14)
    logits = Tensor(_randn(rng, 2, 5, 3), requires_grad=True)
    target = np.zeros((2, 5, 3), dtype=np.float32)
    target[..., 1] = 1.0
    check_gradients(lambda: cross_entropy_loss(logits, target, axis=-1), [logits])
    uniform = Tensor(np.zeros((1, 1, 4), dtype=np.float32))
    loss = cross_entropy_loss(uniform, np.full((1, 1, 4), 0.25, dtype=np.float32), axis=-1)
    assert loss.item() == pytest.approx(np.log(4.0), rel=1e-5)


def test_ops_do_not_mutate_inputs():
    rng = make_rng(15)
    x = Tensor(_randn(rng, 2, 4, 4, 4), requires_grad=True)
    before = x.data.copy()
    store = ParamStore()
    block = ResidualBlock(store, "res", 4, 4, rng)
    loss = mse_loss(block(x), np.zeros((2, 4, 4, 4), dtype=np.float32))
    loss.backward()
    assert np.array_equal(x.data, before)


def test_shape_errors_raise():
    with pytest.raises(DataError):
        matmul(Tensor(np.zeros((2, 3, 4))), Tensor(np.zeros((4, 2))))
    with pytest.raises(DataError):
        conv2d(
            Tensor(np.zeros((1, 3, 4, 4))),
            Tensor(np.zeros((2, 5, 3, 3))),
            Tensor(np.zeros(2)),
        )
    with pytest.raises(DataError):
        mse_loss(Tensor(np.zeros((2, 2))), np.zeros((2, 3)))
    with pytest.raises(DataError):
        Tensor(np.zeros((2, 2)), requires_grad=True).backward()


def test_adam_first_step_and_zero_grad():
    store = ParamStore()
    p = store.add("p", np.array([1.0], dtype=np.float32))
    p.grad = np.array([1.0], dtype=np.float32)
    store.adam_step(lr=0.1)
    assert p.data[0] == pytest.approx(0.9, abs=1e-6)
    # A parameter whose gradient was never set stays put.
    other = ParamStore()
    q = other.add("q", np.array([1.0], dtype=np.float32))
    other.adam_step(lr=0.1)
    assert q.data[0] == 1.0
    # And a zero gradient on a fresh store builds no momentum.
    q.grad = np.array([0.0], dtype=np.float32)
    other.adam_step(lr=0.1)
    assert q.data[0] == 1.0


def test_adam_trajectories_are_deterministic():
    def run():
        store = ParamStore()
        rng = make_rng(16)
        p = store.add("p", rng.normal(size=4).astype(np.float32))
        history = []
        for step in range(5):
            p.grad = (p.data * 0.5 + step * 0.1).astype(np.float32)
            store.adam_step(lr=0.05)
            history.append(p.data.copy())
        return history

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)


def test_rng_statistics():
    rng = make_rng(1234)
    draws = rng.normal(size=100_000)
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 1.0) < 0.03
    again = make_rng(1234).normal(size=100_000)
    assert np.array_equal(draws, again)


def test_model_file_round_trip(tmp_path):
    rng = make_rng(17)
    store = ParamStore()
    Dense(store, "fc", 6, 3, rng)
    Conv2d(store, "conv", 2, 4, rng)
    path = tmp_path / "model.mshm"
    config = {"kind": "test", "dims": [6, 3]}
    save_model(path, config, store.state_arrays())
    loaded_config, arrays = load_model(path)
    assert loaded_config == config
    fresh = ParamStore()
    Dense(fresh, "fc", 6, 3, make_rng(99))
    Conv2d(fresh, "conv", 2, 4, make_rng(99))
    fresh.load_arrays(arrays)
    for name in store.names():
        assert np.array_equal(store[name].data, fresh[name].data)


def test_model_file_shape_validation(tmp_path):
    rng = make_rng(18)
    store = ParamStore()
    Dense(store, "fc", 6, 3, rng)
    path = tmp_path / "model.mshm"
    save_model(path, {}, store.state_arrays())
    _, arrays = load_model(path)
    wrong = ParamStore()
    Dense(wrong, "fc", 6, 4, make_rng(0))
    with pytest.raises(DataError, match="shape"):
        wrong.load_arrays(arrays)


def test_model_file_corruption_detected(tmp_path):
    path = tmp_path / "bad.mshm"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(DataError, match="magic"):
        load_model(path)
    store = ParamStore()
    Dense(store, "fc", 4, 2, make_rng(1))
    good = tmp_path / "good.mshm"
    save_model(good, {"a": 1}, store.state_arrays())
    clipped = tmp_path / "clipped.mshm"
    clipped.write_bytes(good.read_bytes()[:-6])
    with pytest.raises(DataError):
        load_model(clipped)
