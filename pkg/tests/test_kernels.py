import os
import subprocess
import sys

import numpy as np
import pytest

from fracdamp import _kernels


requires_numba = pytest.mark.skipif(
    not _kernels.JIT_ENABLED, reason="numba backend not active"
)


def _march_args(n=24, m=16, seed=3):
    rng = np.random.default_rng(seed)
    l_sub = rng.random(n - 1)
    l_sup = rng.random(n - 1)
    l_diag = -(rng.random(n) + 1.0)
    h = np.full(n, 1.0 / n)
    xi2 = np.geomspace(1e-2, 1e2, m) ** 2
    w = rng.random(m) + 0.5
    eta = rng.random(m) + 0.5
    y0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    psi0 = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    steps = np.array([0, 5, 10], dtype=np.int64)
    return (l_sub, l_diag, l_sup, h, 2, 0.3, w, eta, xi2, y0, psi0, 1e-3, 10, steps)


class TestBackendSelection:
    def test_backend_reported(self):
        assert _kernels.backend_name() in ("numba", "numpy")

    @pytest.mark.parametrize("choice", ["numpy", "auto"])
    def test_env_flag_selects_backend(self, choice):
        env = dict(os.environ, FRACDAMP_KERNELS=choice)
        out = subprocess.run(
            [sys.executable, "-c",
             "from fracdamp import _kernels; print(_kernels.backend_name())"],
            env=env, capture_output=True, text=True, check=True,
        )
        got = out.stdout.strip()
        if choice == "numpy":
            assert got == "numpy"
        else:
            assert got in ("numba", "numpy")

    def test_bad_flag_rejected(self):
        env = dict(os.environ, FRACDAMP_KERNELS="cuda")
        out = subprocess.run(
            [sys.executable, "-c", "import fracdamp._kernels"],
            env=env, capture_output=True, text=True,
        )
        assert out.returncode != 0
        assert "FRACDAMP_KERNELS" in out.stderr


@requires_numba
class TestPathEquivalence:
    def test_frac_conv(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal(500)
        lag = rng.random(500)
        a = _kernels.frac_conv_numpy(w, lag)
        b = _kernels.frac_conv_numba(w, lag)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_psi_march(self):
        rng = np.random.default_rng(1)
        m = 32
        xi2 = np.geomspace(1e-3, 1e3, m) ** 2
        eta = rng.random(m) + 0.1
        w = rng.random(m) + 0.1
        s = rng.standard_normal(200)
        a_hist, a_flux = _kernels.psi_march_numpy(xi2, eta, w * eta, 0.3, s, 1e-2)
        b_hist, b_flux = _kernels.psi_march_numba(xi2, eta, w * eta, 0.3, s, 1e-2)
        np.testing.assert_allclose(a_hist, b_hist, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(a_flux, b_flux, rtol=1e-12, atol=1e-14)

    def test_midpoint_march(self):
        args = _march_args()
        a = _kernels.midpoint_march_numpy(*args)
        b = _kernels.midpoint_march_numba(*args)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)
