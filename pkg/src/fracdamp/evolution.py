"""Time integration, energy traces and decay-exponent fitting.

The one-step map is the implicit midpoint rule (a Cayley transform of the
generator): exactly norm-conserving when the damping weight is zero and
exactly contractive otherwise, so "energy never increases" is a hard
property of the scheme, not an accuracy statement.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .errors import FitDataError, NumericalError, ParameterError, ShapeError
from .model import StateVector, energy
from .operator import SystemOperator


class InitialPreset(str, enum.Enum):
    SMOOTH_BUMP = "smooth-bump"
    LOWEST_MODE = "lowest-mode"
    CUSTOM = "custom"
    ZERO = "zero"  # test hook


@dataclass(frozen=True)
class EnergyTrace:
    """Sampled run history: energy E, dissipation rate D <= 0, damping flux."""

    t: np.ndarray
    E: np.ndarray
    D: np.ndarray
    flux: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "E", "D", "flux_re", "flux_im"])
            for t, e, d, f in zip(self.t, self.E, self.D, self.flux):
                writer.writerow(
                    [format(t, ".17g"), format(e, ".17g"), format(d, ".17g"),
                     format(f.real, ".17g"), format(f.imag, ".17g")]
                )


@dataclass(frozen=True)
class DecayFit:
    window: Tuple[float, float]
    exponent: float
    intercept: float
    r_squared: float


def _midpoint_arrays(op: SystemOperator):
    return (
        op.l_sub, op.l_diag, op.l_sup, op.xgrid.h, op.boundary_index,
        op.zeta, op.xigrid.w, op.xigrid.eta, op.xigrid.xi**2,
    )


def step_implicit_midpoint(op: SystemOperator, state: StateVector, dt: float) -> StateVector:
    """One midpoint step (I - dt/2 A) Y' = (I + dt/2 A) Y."""
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got dt={dt}")
    if state.y.size != op.xgrid.x.size or state.psi.size != op.xigrid.xi.size:
        raise ShapeError("state does not match operator grids")
    try:
        _, _, _, y, psi = _kernels.midpoint_march(
            *_midpoint_arrays(op),
            state.y, state.psi, float(dt), 1, np.array([0, 1], dtype=np.int64),
        )
    except np.linalg.LinAlgError as exc:  # not expected for dt > 0
        raise NumericalError(f"midpoint solve failed: {exc}", {"dt": dt}) from exc
    return StateVector(y=y, psi=psi)


def simulate(
    op: SystemOperator,
    y0: StateVector,
    t_final: float,
    dt: float,
    sample_stride: Optional[int] = None,
) -> EnergyTrace:
    """March Y' = A Y and record the decimated energy trace.

    The trace contains E, the discrete dissipation rate D (exact energy
    derivative at the sample), and the boundary damping flux read from the
    coupling row.
    """
    if dt <= 0 or t_final <= 0:
        raise ParameterError(f"t_final and dt must be positive, got {t_final}, {dt}")
    if y0.y.size != op.xgrid.x.size or y0.psi.size != op.xigrid.xi.size:
        raise ShapeError("initial state does not match operator grids")
    n_steps = max(1, int(round(t_final / dt)))  # trace ends at n_steps*dt
    if sample_stride is None:
        sample_stride = max(1, n_steps // 2000)
    steps = np.arange(0, n_steps + 1, int(sample_stride), dtype=np.int64)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    try:
        e_out, d_out, s_out, _, _ = _kernels.midpoint_march(
            *_midpoint_arrays(op), y0.y, y0.psi, float(dt), n_steps, steps,
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"time march failed: {exc}", {"dt": dt, "n_steps": n_steps}) from exc
    flux = op.flux_sign * 1j * op.zeta * s_out
    return EnergyTrace(t=steps * dt, E=e_out, D=d_out, flux=flux)


# ---------------------------------------------------------------------------
# initial-state preparation
# ---------------------------------------------------------------------------


def _near_kernel_pairs(op: SystemOperator, tol: float):
    """Eigen-decomposition of the weighted similarity; returns modes with |lam| < tol."""
    a = op.weighted_dense()
    try:
        vals, vl, vr = sla.eig(a, left=True, right=True)
    except Exception as exc:  # pragma: no cover - LAPACK failure path
        raise NumericalError(f"dense eigensolve failed: {exc}") from exc
    sel = np.abs(vals) < tol
    return vals, vl, vr, sel


def project_out_near_kernel(op: SystemOperator, state: StateVector, tol: float = 1e-8) -> StateVector:
    """Remove components along discrete modes with |eigenvalue| < tol.

    Cheap path first: if the smallest singular value of A exceeds tol there
    is nothing to remove.  Otherwise an oblique spectral projector is built
    from the left/right eigenvectors of the weighted similarity matrix.
    """
    from .resolvent import smallest_singular_value  # local import, avoids a cycle

    if smallest_singular_value(op) >= tol:
        return state
    vals, vl, vr, sel = _near_kernel_pairs(op, tol)
    if not np.any(sel):
        return state
    sw = np.sqrt(op.weights)
    z = sw * np.concatenate((state.y, state.psi))
    v = vr[:, sel]
    wl = vl[:, sel]
    coeff = np.linalg.solve(wl.conj().T @ v, wl.conj().T @ z)
    z = z - v @ coeff
    z = z / sw
    n = op.xgrid.x.size
    return StateVector(y=z[:n], psi=z[n:])


def _lowest_mode(op: SystemOperator, tol: float) -> StateVector:
    vals, _, vr, _ = _near_kernel_pairs(op, tol)
    ok = np.abs(vals) > tol
    if not np.any(ok):
        raise NumericalError("no resolved nonzero eigenmode found")
    idx = np.flatnonzero(ok)[np.argmax(vals[ok].real)]
    z = vr[:, idx] / np.sqrt(op.weights)
    n = op.xgrid.x.size
    mode = StateVector(y=z[:n], psi=z[n:])
    resid = _mode_residual(op, mode, vals[idx])
    if resid > 1e-6:
        raise NumericalError(
            f"eigenmode residual {resid:.3e} too large", {"eigenvalue": vals[idx]}
        )
    return mode


def _mode_residual(op: SystemOperator, state: StateVector, lam: complex) -> float:
    from .model import weighted_norm

    ay = op.apply(state)
    resid = StateVector(y=ay.y - lam * state.y, psi=ay.psi - lam * state.psi)
    return weighted_norm(resid, op) / weighted_norm(state, op)


def prepare_initial_state(
    op: SystemOperator,
    preset: InitialPreset | str = InitialPreset.SMOOTH_BUMP,
    custom: Optional[StateVector] = None,
    project_tol: float = 1e-8,
) -> StateVector:
    """Build an initial state compatible with the damped boundary conditions.

    Smooth presets are projected off the near-kernel modes (|eigenvalue| <
    project_tol, the discrete proxy for range membership) and scaled to unit
    energy.  The smooth bump x^2 (1-x)^2 has vanishing flux at both ends, so
    it is compatible with the damped boundary row for either variant.  The
    lowest-mode preset returns the slowest decaying resolved eigenmode.
    """
    preset = InitialPreset(preset)
    x = op.xgrid.x
    if preset is InitialPreset.ZERO:
        return StateVector(y=np.zeros_like(x, dtype=complex), psi=np.zeros(op.xigrid.xi.size, dtype=complex))
    if preset is InitialPreset.LOWEST_MODE:
        state = _lowest_mode(op, project_tol)
    else:
        if preset is InitialPreset.CUSTOM:
            if custom is None:
                raise ParameterError("custom preset requires the 'custom' state argument")
            state = custom
        else:
            y = (x**2 * (1.0 - x) ** 2).astype(complex)
            state = StateVector(y=y, psi=np.zeros(op.xigrid.xi.size, dtype=complex))
        state = project_out_near_kernel(op, state, tol=project_tol)
    e0 = energy(state, op)
    if e0 <= 0.0:
        raise NumericalError("prepared state has zero energy")
    scale = 1.0 / math.sqrt(e0)
    return StateVector(y=scale * state.y, psi=scale * state.psi)


def fit_decay_exponent(trace: EnergyTrace, window: Tuple[float, float]) -> DecayFit:
    """Least-squares line on (log t, log E); exponent is the negated slope."""
    lo, hi = window
    if not (0.0 < lo < hi):
        raise ParameterError(f"fit window must satisfy 0 < lo < hi, got {window}")
    mask = (trace.t >= lo) & (trace.t <= hi)
    if mask.sum() < 20:
        raise FitDataError(
            f"need >= 20 trace samples inside the window, found {int(mask.sum())}"
        )
    e = trace.E[mask]
    if np.any(e <= 0.0):
        raise FitDataError("energy hits zero or negative values inside the fit window")
    lt = np.log(trace.t[mask])
    le = np.log(e)
    slope, intercept = np.polyfit(lt, le, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(window=(float(lo), float(hi)), exponent=float(-slope),
                    intercept=float(intercept), r_squared=float(r2))
