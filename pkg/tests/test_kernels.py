import numpy as np
import pytest

from franneal._kernels import BACKEND, _fallback, causal_convolve, linear_recursion

try:
    from franneal._kernels import _core
except ImportError:
    _core = None


def brute_convolve(kernel, x):
    n = len(kernel)
    out = np.zeros(n)
    for m in range(n):
        for i in range(m + 1):
            out[m] += kernel[i] * x[m - i]
    return out


def test_causal_convolve_matches_brute_force():
    rng = np.random.default_rng(3)
    kernel = rng.standard_normal(64)
    x = rng.standard_normal(64)
    np.testing.assert_allclose(causal_convolve(kernel, x), brute_convolve(kernel, x), rtol=1e-12)


def test_causal_convolve_rejects_length_mismatch():
    with pytest.raises(ValueError):
        causal_convolve(np.ones(4), np.ones(5))


@pytest.mark.skipif(_core is None, reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(7)
    kernel = (np.arange(1, 513) / 512.0) ** -0.2
    x = rng.standard_normal(512)
    a = _core.causal_convolve(kernel, x)
    b = _fallback.causal_convolve(kernel, x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)

    E = np.array([[0.95, 0.01], [0.02, 0.9]])
    db = rng.standard_normal((200, 2))
    np.testing.assert_allclose(
        _core.linear_recursion(E, db, 1.7),
        _fallback.linear_recursion(E, db, 1.7),
        rtol=1e-12,
        atol=1e-14,
    )


def test_linear_recursion_matches_manual_loop():
    rng = np.random.default_rng(11)
    E = np.array([[0.9, -0.05], [0.1, 0.8]])
    db = rng.standard_normal((50, 2))
    scale = 0.7
    got = linear_recursion(E, db, scale)
    u = np.zeros(2)
    assert np.all(got[0] == 0.0)
    for n in range(50):
        u = E @ u + scale * db[n]
        np.testing.assert_allclose(got[n + 1], u, rtol=1e-12)


def test_linear_recursion_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        linear_recursion(np.eye(3), np.zeros((5, 2)), 1.0)


def test_backend_reported():
    assert BACKEND in {"compiled", "fallback"}
