"""Both conv backends must implement the same index contract."""

import numpy as np
import pytest

from nxseg import kernels

pytestmark = pytest.mark.skipif(kernels.numba is None,
                                reason="numba not installed")

SHAPES = [
    (1, 1, 3, 5, 1),
    (2, 3, 3, 8, 2),
    (4, 2, 5, 16, 4),
    (8, 8, 3, 100, 1),
    (3, 5, 7, 40, 2),
]


@pytest.mark.parametrize("cin,cout,L,T,dilation", SHAPES)
def test_forward_equivalence(cin, cout, L, T, dilation):
    rng = np.random.default_rng(cin * 100 + cout)
    x = rng.standard_normal((cin, T))
    k = rng.standard_normal((cout, cin, L))
    np.testing.assert_allclose(kernels.conv1d_forward_nb(x, k, dilation),
                               kernels.conv1d_forward_np(x, k, dilation),
                               atol=1e-12)


@pytest.mark.parametrize("cin,cout,L,T,dilation", SHAPES)
def test_backward_equivalence(cin, cout, L, T, dilation):
    rng = np.random.default_rng(cin * 100 + cout + 1)
    x = rng.standard_normal((cin, T))
    k = rng.standard_normal((cout, cin, L))
    g = rng.standard_normal((cout, T))
    np.testing.assert_allclose(
        kernels.conv1d_backward_input_nb(k, g, dilation),
        kernels.conv1d_backward_input_np(k, g, dilation), atol=1e-12)
    np.testing.assert_allclose(
        kernels.conv1d_backward_kernel_nb(x, g, L, dilation),
        kernels.conv1d_backward_kernel_np(x, g, L, dilation), atol=1e-12)


def test_forward_matches_direct_convolution():
    # independent oracle: literal triple loop in python
    rng = np.random.default_rng(42)
    cin, cout, L, T, dilation = 3, 2, 3, 9, 2
    x = rng.standard_normal((cin, T))
    k = rng.standard_normal((cout, cin, L))
    expected = np.zeros((cout, T))
    c = (L - 1) // 2
    for co in range(cout):
        for t in range(T):
            for ci in range(cin):
                for l in range(L):
                    s = t + dilation * (l - c)
                    if 0 <= s < T:
                        expected[co, t] += k[co, ci, l] * x[ci, s]
    np.testing.assert_allclose(kernels.conv1d_forward_np(x, k, dilation),
                               expected, atol=1e-12)
    np.testing.assert_allclose(kernels.conv1d_forward_nb(x, k, dilation),
                               expected, atol=1e-12)


def test_backend_resolution_env(monkeypatch):
    monkeypatch.setenv("NXSG_BACKEND", "numpy")
    assert kernels._resolve_backend() == "numpy"
    monkeypatch.setenv("NXSG_BACKEND", "numba")
    assert kernels._resolve_backend() == "numba"
    monkeypatch.setenv("NXSG_BACKEND", "auto")
    assert kernels._resolve_backend() in ("numpy", "numba")
    monkeypatch.setenv("NXSG_BACKEND", "bogus")
    with pytest.warns(RuntimeWarning):
        assert kernels._resolve_backend() == "numpy"
