import numpy as np
import pytest

from fracdamp.diffusive import build_xi_quadrature
from fracdamp.model import PowerLawKappa, ProblemSpec, Variant
from fracdamp.operator import assemble_operator, build_x_grid


def make_operator(
    variant=Variant.P,
    alpha=0.5,
    beta=0.5,
    rho=1.0,
    nx=64,
    nxi=64,
    g=1.0,
    xi_min=1e-3,
    xi_max=1e2,
    zeta_override=None,
):
    """Small assembled operator for structural tests (modest xi range keeps

    dense eigenproblems well conditioned)."""
    spec = ProblemSpec(variant=variant, kappa=PowerLawKappa(alpha), beta=beta, rho=rho)
    xg = build_x_grid(nx, g)
    xig = build_xi_quadrature(beta, nxi, xi_min, xi_max)
    return assemble_operator(spec, xg, xig, zeta_override=zeta_override)


@pytest.fixture
def small_op():
    return make_operator()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(op, rng):
    from fracdamp.model import StateVector

    n, m = op.xgrid.x.size, op.xigrid.xi.size
    return StateVector(
        y=rng.standard_normal(n) + 1j * rng.standard_normal(n),
        psi=rng.standard_normal(m) + 1j * rng.standard_normal(m),
    )
