"""Finite-volume assembly of the coupled generator.

The field block is the flux-form second difference i*(kappa y_x)_x on a
graded mesh with no node at x=0; the relaxation block is diagonal; the two
couple through one boundary cell.  The coupling signs are chosen so that the
discrete dissipation identity

    Re<A Y, Y>_H = -zeta * sum_k w_k xi_k^2 |psi_k|^2

holds exactly (to roundoff) for every state, mirroring the continuous
boundary cancellation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .diffusive import XiGrid
from .errors import ConfigurationError, ParameterError, ShapeError
from .model import (
    BoundaryClass,
    ProblemSpec,
    StateVector,
    Variant,
    classify_kappa,
)


@dataclass(frozen=True)
class XGrid:
    """Graded spatial mesh x_i = (i/n)**g, i=1..n, with dual-cell widths.

    Cell interfaces sit midway between nodes, with the outer interfaces
    pinned to 0 and 1, so the widths always sum to 1 exactly.
    """

    x: np.ndarray
    h: np.ndarray
    g: float

    def __post_init__(self):
        for name in ("x", "h"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def build_x_grid(n: int, g: float = 1.0) -> XGrid:
    if n < 16:
        raise ParameterError(f"n must be >= 16, got n={n}")
    if not (1.0 <= g <= 4.0):
        raise ParameterError(f"grading exponent g must lie in [1,4], got g={g}")
    i = np.arange(1, n + 1, dtype=float)
    x = (i / n) ** g
    interfaces = np.empty(n + 1)
    interfaces[0] = 0.0
    interfaces[-1] = 1.0
    interfaces[1:-1] = 0.5 * (x[:-1] + x[1:])
    h = np.diff(interfaces)
    return XGrid(x=x, h=h, g=float(g))


def default_grading(spec: ProblemSpec) -> float:
    """g=2 when the degeneracy is strong (alpha >= 1 or m_kappa >= 1), else 1."""
    alpha = spec.alpha
    if (alpha is not None and alpha >= 1.0) or spec.m_kappa >= 1.0:
        return 2.0
    return 1.0


def _fv_tridiag(kappa: Callable, xgrid: XGrid, dirichlet_left: bool):
    """Real tridiagonal L with (L y)_i = ((kappa y_x)_x)_i in flux form.

    Interface conductances are kappa(midpoint)/(node spacing).  The outer
    fluxes at x=0 and x=1 are zero here; 'dirichlet_left' adds the ghost-cell
    flux kappa(x_1/2) * y_1 / x_1 instead.  Boundary coupling fluxes are
    applied separately by the operator.
    """
    x, h = xgrid.x, xgrid.h
    n = x.size
    mid = 0.5 * (x[:-1] + x[1:])
    a = np.asarray(kappa(mid), dtype=float) / np.diff(x)
    a_left = float(kappa(0.5 * x[0])) / x[0] if dirichlet_left else 0.0
    diag = np.empty(n)
    diag[0] = -(a_left + a[0]) / h[0] if n > 1 else -a_left / h[0]
    diag[1:-1] = -(a[:-1] + a[1:])[: n - 2] / h[1:-1]
    diag[-1] = -a[-1] / h[-1]
    sub = a / h[1:]
    sup = a / h[:-1]
    return sub, diag, sup


@dataclass(frozen=True)
class SystemOperator:
    """Assembled discrete generator with its weighted inner product.

    Attributes l_sub/l_diag/l_sup hold the real tridiagonal L (the field
    block is i*L); `boundary_index` is the damped cell, `flux_sign` the sign
    of the boundary flux value (-i*zeta*S at x=0 for variant P, +i*zeta*S at
    x=1 for the primed variant, S = sum w_k eta_k psi_k).
    """

    problem: ProblemSpec
    xgrid: XGrid
    xigrid: XiGrid
    zeta: float
    boundary_index: int
    flux_sign: float
    l_sub: np.ndarray
    l_diag: np.ndarray
    l_sup: np.ndarray
    left_bc: str

    def __post_init__(self):
        for name in ("l_sub", "l_diag", "l_sup"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dimension(self) -> int:
        return self.xgrid.x.size + self.xigrid.xi.size

    @property
    def weights(self) -> np.ndarray:
        """Diagonal of the weighted inner product, (h_i ; zeta*w_k)."""
        return np.concatenate((self.xgrid.h, self.zeta * self.xigrid.w))

    def boundary_flux(self, state: StateVector) -> complex:
        """Damping flux value at the damped end (the coupling-row readout)."""
        s = np.dot(self.xigrid.w * self.xigrid.eta, state.psi)
        return complex(self.flux_sign * 1j * self.zeta * s)

    def apply(self, state: StateVector) -> StateVector:
        if state.y.size != self.xgrid.x.size or state.psi.size != self.xigrid.xi.size:
            raise ShapeError("state does not match operator grids")
        y, psi = state.y, state.psi
        ly = self.l_diag * y
        if y.size > 1:
            ly[:-1] += self.l_sup * y[1:]
            ly[1:] += self.l_sub * y[:-1]
        out_y = 1j * ly
        s = np.dot(self.xigrid.w * self.xigrid.eta, psi)
        out_y[self.boundary_index] -= (self.zeta / self.xgrid.h[self.boundary_index]) * s
        out_psi = -self.xigrid.xi**2 * psi + self.xigrid.eta * y[self.boundary_index]
        return StateVector(y=out_y, psi=out_psi)

    def dissipation(self, state: StateVector) -> float:
        """-zeta * sum w_k xi_k^2 |psi_k|^2 <= 0 (the exact energy derivative)."""
        return float(
            -self.zeta * np.dot(self.xigrid.w * self.xigrid.xi**2, np.abs(state.psi) ** 2)
        )

    def pde_block(self) -> sp.csr_matrix:
        """The field block i*L alone as a complex sparse matrix."""
        n = self.xgrid.x.size
        return sp.diags(
            [1j * self.l_sub, 1j * self.l_diag, 1j * self.l_sup],
            offsets=[-1, 0, 1],
            shape=(n, n),
            format="csr",
        )

    def dense(self) -> np.ndarray:
        n = self.xgrid.x.size
        m = self.xigrid.xi.size
        a = np.zeros((n + m, n + m), dtype=np.complex128)
        idx = np.arange(n)
        a[idx, idx] = 1j * self.l_diag
        a[idx[:-1], idx[:-1] + 1] = 1j * self.l_sup
        a[idx[1:], idx[1:] - 1] = 1j * self.l_sub
        b = self.boundary_index
        a[b, n:] += -(self.zeta / self.xgrid.h[b]) * self.xigrid.w * self.xigrid.eta
        a[n:, b] += self.xigrid.eta
        a[n + np.arange(m), n + np.arange(m)] = -self.xigrid.xi**2
        return a

    def weighted_dense(self) -> np.ndarray:
        """Similarity W^(1/2) A W^(-1/2), whose Euclidean geometry is the H one."""
        sw = np.sqrt(self.weights)
        return self.dense() * (sw[:, None] / sw[None, :])


def assemble_operator(
    spec: ProblemSpec,
    xgrid: XGrid,
    xigrid: XiGrid,
    zeta_override: Optional[float] = None,
) -> SystemOperator:
    """Build the discrete generator for either variant.

    `zeta_override` exists for undamped sanity runs (conservation tests);
    pass 0.0 to sever the damping while keeping the grids.
    """
    if spec.gamma != 0.0:
        raise ConfigurationError(
            "operator assembly requires gamma=0 (exponential kernel tempering is "
            "supported by the kernel oracle only)"
        )
    if abs(xigrid.beta - spec.beta) > 1e-12:
        raise ConfigurationError(
            f"xi-grid was built for beta={xigrid.beta}, problem has beta={spec.beta}"
        )
    report = classify_kappa(spec.kappa)
    if spec.variant is Variant.P:
        if report.m_kappa >= 1.0:
            raise ConfigurationError(
                f"variant P requires m_kappa < 1, got m_kappa={report.m_kappa:.6g}"
            )
        boundary_index = 0
        flux_sign = -1.0
        left_bc = "damped_flux"
        dirichlet_left = False
    else:
        boundary_index = xgrid.x.size - 1
        flux_sign = +1.0
        if report.boundary_class is BoundaryClass.DIRICHLET_AT_ZERO:
            left_bc = "dirichlet"
            dirichlet_left = True
        else:
            left_bc = "weighted_neumann"
            dirichlet_left = False
    sub, diag, sup = _fv_tridiag(spec.kappa, xgrid, dirichlet_left)
    zeta = spec.zeta if zeta_override is None else float(zeta_override)
    if zeta < 0.0:
        raise ParameterError(f"zeta must be >= 0, got zeta_override={zeta_override}")
    return SystemOperator(
        problem=spec,
        xgrid=xgrid,
        xigrid=xigrid,
        zeta=zeta,
        boundary_index=boundary_index,
        flux_sign=flux_sign,
        l_sub=sub,
        l_diag=diag,
        l_sup=sup,
        left_bc=left_bc,
    )


def apply_operator(op: SystemOperator, state: StateVector) -> StateVector:
    return op.apply(state)


def export_operator(op: SystemOperator, matrix_path, meta_path) -> None:
    """Debug export: 'row col re im' coordinate lines plus a JSON grid sidecar."""
    a = op.dense()
    rows, cols = np.nonzero(a)
    with open(matrix_path, "w") as fh:
        for r, c in zip(rows, cols):
            v = a[r, c]
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
    meta = {
        "variant": op.problem.variant.value,
        "nx": int(op.xgrid.x.size),
        "n_xi": int(op.xigrid.xi.size),
        "grading": op.xgrid.g,
        "xi_min": op.xigrid.xi_min,
        "xi_max": op.xigrid.xi_max,
        "beta": op.problem.beta,
        "rho": op.problem.rho,
        "zeta": op.zeta,
        "boundary_index": int(op.boundary_index),
        "left_bc": op.left_bc,
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
