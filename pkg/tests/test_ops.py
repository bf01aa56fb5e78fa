import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cistgcn.tensor import Tensor, ops
from cistgcn.verification import OP_NAMES, op_check

T = lambda a: Tensor(np.asarray(a, dtype=np.float64))


@pytest.mark.parametrize("name", OP_NAMES)
@pytest.mark.parametrize("seed", range(10))
def test_gradient_f64(name, seed):
    report = op_check(name, seed, np.float64)
    assert report.passed, f"{name}: {report}"


@pytest.mark.parametrize("name", OP_NAMES)
@pytest.mark.parametrize("seed", range(10))
def test_gradient_f32(name, seed):
    report = op_check(name, seed, np.float32)
    assert report.passed, f"{name}: {report}"


# matmul

def test_matmul_identity(rng):
    m = rng.normal(size=(3, 3))
    np.testing.assert_array_equal(ops.matmul(T(np.eye(3)), T(m)).data, m)


def test_matmul_hand_example():
    out = ops.matmul(T([[1, 2], [3, 4]]), T([[5], [6]]))
    np.testing.assert_array_equal(out.data, [[17], [39]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 5\)"):
        ops.matmul(T(np.ones((2, 3))), T(np.ones((4, 5))))


def test_matmul_associativity(rng):
    for _ in range(10):
        # well-conditioned: orthogonal times near-identity
        mats = [np.linalg.qr(rng.normal(size=(8, 8)))[0] + 0.1 * np.eye(8) for _ in range(3)]
        a, b, c = (T(m) for m in mats)
        left = ops.matmul(ops.matmul(a, b), c).data
        right = ops.matmul(a, ops.matmul(b, c)).data
        assert np.max(np.abs(left - right)) / np.max(np.abs(left)) < 1e-10


# conv1d

def brute_conv(x, w, dilation, pad_left, out_len):
    c_out, c_in, k = w.shape
    y = np.zeros((c_out, out_len))
    for o in range(c_out):
        for t in range(out_len):
            for i in range(c_in):
                for j in range(k):
                    s = t + j * dilation - pad_left
                    if 0 <= s < x.shape[1]:
                        y[o, t] += w[o, i, j] * x[i, s]
    return y


def test_conv_unit_kernel_is_identity(rng):
    x = rng.normal(size=(1, 7))
    np.testing.assert_array_equal(ops.conv1d(T(x), T(np.ones((1, 1, 1)))).data, x)


def test_conv_hand_example():
    out = ops.conv1d(T([[1, 2, 3, 4]]), T([[[1, 1]]]), dilation=2, padding="valid")
    np.testing.assert_array_equal(out.data, [[4, 6]])


@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 2, 3]), st.integers(1, 3),
       st.integers(5, 12), st.sampled_from(["same", "valid"]), st.integers(0, 2**31))
def test_conv_matches_brute_force(c_in, c_out, k, dilation, L, padding, seed):
    span = (k - 1) * dilation + 1
    if padding == "valid" and span > L:
        return
    r = np.random.default_rng(seed)
    x, w = r.normal(size=(c_in, L)), r.normal(size=(c_out, c_in, k))
    out = ops.conv1d(T(x), T(w), dilation=dilation, padding=padding).data
    pad = (span - 1) // 2 if padding == "same" else 0
    expected = brute_conv(x, w, dilation, pad, L if padding == "same" else L - span + 1)
    np.testing.assert_allclose(out, expected, atol=1e-12)
    if padding == "same":
        assert out.shape[-1] == L


def test_conv_span_too_long():
    with pytest.raises(ValueError):
        ops.conv1d(T(np.ones((1, 3))), T(np.ones((1, 1, 3))), dilation=2, padding="valid")


def test_conv_rejects_bad_dilation():
    with pytest.raises(ValueError):
        ops.conv1d(T(np.ones((1, 5))), T(np.ones((1, 1, 3))), dilation=0)


# separable conv

def test_separable_equals_composition(rng):
    x, dw, pw = rng.normal(size=(2, 3, 9)), rng.normal(size=(3, 1, 3)), rng.normal(size=(4, 3, 1))
    got = ops.separable_conv(T(x), T(dw), T(pw), dilation=2).data
    h = ops.conv1d(T(x), T(dw), dilation=2, groups=3)
    np.testing.assert_allclose(got, ops.conv1d(h, T(pw), padding="valid").data, atol=1e-12)


def test_separable_pointwise_only_is_linear_map(rng):
    x, pw = rng.normal(size=(3, 6)), rng.normal(size=(4, 3, 1))
    got = ops.separable_conv(T(x), T(np.ones((3, 1, 1))), T(pw)).data
    np.testing.assert_allclose(got, pw[:, :, 0] @ x, atol=1e-12)


def test_separable_channel_mismatch():
    with pytest.raises(ValueError):
        ops.separable_conv(T(np.ones((3, 6))), T(np.ones((2, 1, 3))), T(np.ones((4, 2, 1))))


# batch norm

def test_batch_norm_standardized_input_passes_through():
    # alternating +-1 has exactly zero mean and unit variance per channel; eps
    # scales the output by 1/sqrt(1 + eps), so |delta| = |x| * ~5e-6
    x = np.broadcast_to(np.where(np.arange(50) % 2 == 0, 1.0, -1.0), (4, 3, 50))
    out = ops.batch_norm(T(x), T(np.ones(3)), T(np.zeros(3)), np.zeros(3), np.ones(3), True)
    assert np.max(np.abs(out.data - x)) < 1e-5


def test_batch_norm_constant_channel_gives_beta():
    x = np.full((4, 2, 5), 7.0)
    beta = np.array([0.3, -1.2])
    out = ops.batch_norm(T(x), T(np.ones(2)), T(beta), np.zeros(2), np.ones(2), True)
    np.testing.assert_allclose(out.data, np.broadcast_to(beta[None, :, None], x.shape), atol=1e-9)


def test_batch_norm_running_stats_and_eval(rng):
    x = rng.normal(2.0, 3.0, size=(8, 2, 10))
    rm, rv = np.zeros(2), np.ones(2)
    ops.batch_norm(T(x), T(np.ones(2)), T(np.zeros(2)), rm, rv, True, momentum=0.1)
    m = 80
    np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2)))
    np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2)) * m / (m - 1))
    out = ops.batch_norm(T(x), T(np.ones(2)), T(np.zeros(2)), rm, rv, False)
    np.testing.assert_allclose(out.data, (x - rm[None, :, None]) / np.sqrt(rv[None, :, None] + 1e-5))


def test_batch_norm_rejects_bad_eps():
    with pytest.raises(ValueError):
        ops.batch_norm(T(np.ones((2, 1, 3))), T(np.ones(1)), T(np.zeros(1)), np.zeros(1), np.ones(1),
                       True, eps=0.0)


# prelu

def test_prelu_special_slopes(rng):
    x = rng.normal(size=(2, 3, 4))
    np.testing.assert_array_equal(ops.prelu(T(x), T(np.zeros(3))).data, np.maximum(x, 0))
    np.testing.assert_array_equal(ops.prelu(T(x), T(np.ones(3))).data, x)


def test_prelu_zero_takes_alpha_branch():
    x = Tensor(np.zeros((1, 1, 1)), requires_grad=True)
    a = Tensor(np.array([0.25]), requires_grad=True)
    from cistgcn.tensor import backward, new_tape
    with new_tape():
        backward(ops.sum(ops.prelu(x, a)))
    assert x.grad.item() == 0.25


# pooling

def test_pool_examples():
    x = T([[2.0, 4.0, 6.0]])
    assert ops.pool(x, 1, "avg").data.item() == 4.0
    assert ops.pool(x, 1, "max").data.item() == 6.0
    assert ops.pool(x, 1, "attention", scores=T([[0.7, 0.7, 0.7]])).data.item() == pytest.approx(4.0)


def test_pool_keepdims_and_empty_axis():
    assert ops.pool(T(np.ones((2, 3, 4))), 1, "avg", keepdims=True).shape == (2, 1, 4)
    with pytest.raises(ValueError):
        ops.pool(T(np.ones((2, 0))), 1, "avg")


# shape ops and softmax

@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=4, max_side=4), elements=st.floats(-5, 5)))
def test_reshape_and_transpose_roundtrip(x):
    t = T(x)
    np.testing.assert_array_equal(ops.reshape(ops.reshape(t, (-1,)), x.shape).data, x)
    np.testing.assert_array_equal(ops.swapaxes(ops.swapaxes(t, 0, 1), 0, 1).data, x)


@given(hnp.arrays(np.float64, (3, 5), elements=st.floats(-1e4, 1e4)))
def test_softmax_is_stable(x):
    y = ops.softmax(T(x), axis=-1).data
    assert np.all(np.isfinite(y))
    np.testing.assert_allclose(y.sum(axis=-1), 1.0)


def test_linear_and_std_match_numpy(rng):
    x, w, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3)), rng.normal(size=5)
    np.testing.assert_allclose(ops.linear(T(x), T(w), T(b)).data, x @ w.T + b)
    np.testing.assert_allclose(ops.std(T(x), axis=0).data, np.sqrt(x.var(axis=0) + 1e-8))
