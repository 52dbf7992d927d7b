"""Problem configuration, degeneracy classification and discrete energy.

A problem couples a Schrodinger-type field y on (0,1] whose diffusion
coefficient kappa vanishes at x=0 with a family of boundary relaxation modes
psi(xi).  The damping strength enters through the weight
zeta = rho*sin(beta*pi)/pi; the position of the degeneracy measure
m_kappa = sup x|kappa'(x)|/kappa(x) relative to 1 selects the boundary
condition at the degenerate end.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    CoefficientError,
    ConfigurationError,
    HypothesisViolationError,
    ParameterError,
    ShapeError,
)


class Variant(str, enum.Enum):
    """Which end carries the fractional damping.

    P      - damping acts at the degenerate end x=0, free Neumann end at x=1.
    Pprime - damping acts at x=1; the condition at x=0 follows the degeneracy
             class (Dirichlet for m_kappa < 1, zero weighted flux otherwise).
    """

    P = "P"
    PPRIME = "Pprime"


class BoundaryClass(str, enum.Enum):
    DIRICHLET_AT_ZERO = "dirichlet_at_zero"          # 0 <= m_kappa < 1
    WEIGHTED_NEUMANN_AT_ZERO = "weighted_neumann_at_zero"  # 1 <= m_kappa < 2


def derive_constants(beta: float, rho: float, alpha: Optional[float] = None):
    """Derived damping constants (zeta, nu_alpha).

    zeta = rho*sin(beta*pi)/pi is the diffusive weight; nu_alpha =
    (1-alpha)/(2-alpha) is the fractional order of the power-law resolvent
    basis and is only defined for alpha in (0,1).
    """
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"beta must lie in (0,1), got beta={beta}")
    if not (rho > 0.0):
        raise ParameterError(f"rho must be positive, got rho={rho}")
    nu_alpha = None
    if alpha is not None:
        if not (0.0 < alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0,1), got alpha={alpha}")
        nu_alpha = (1.0 - alpha) / (2.0 - alpha)
    zeta = rho * math.sin(beta * math.pi) / math.pi
    return zeta, nu_alpha


@dataclass(frozen=True)
class PowerLawKappa:
    """kappa(x) = x**alpha with 0 < alpha < 2."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ParameterError(f"alpha must lie in (0,2), got alpha={self.alpha}")

    def __call__(self, x):
        return np.power(np.asarray(x, dtype=float), self.alpha)


@dataclass(frozen=True)
class TabulatedKappa:
    """kappa given by samples on (0,1]; kappa(0)=0 is implied.

    Evaluation interpolates linearly between samples (anchored at (0,0));
    points beyond the last sample reuse the last value.
    """

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 3:
            raise CoefficientError("tabulated kappa needs matching 1-d arrays with >= 3 samples")
        if np.any(np.diff(x) <= 0):
            raise CoefficientError("tabulated kappa sample locations must be strictly increasing")
        if x[0] <= 0.0 or x[-1] > 1.0:
            raise CoefficientError("tabulated kappa samples must lie in (0, 1]")
        if np.any(v <= 0.0):
            raise CoefficientError("tabulated kappa must be positive at every sample")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        return np.interp(xq, np.concatenate(([0.0], self.x)), np.concatenate(([0.0], self.values)))


KappaSpec = Union[PowerLawKappa, TabulatedKappa]


def tabulate_kappa(fn, n: int = 400, x_min: float = 1e-8) -> TabulatedKappa:
    """Sample a coefficient on a log-spaced grid accumulating at x=0.

    The degeneracy ratio x|kappa'|/kappa is typically extremal in the
    degenerate limit, so samples concentrate there.
    """
    x = np.geomspace(x_min, 1.0, int(n))
    return TabulatedKappa(x=x, values=np.asarray(fn(x), dtype=float))


@dataclass(frozen=True)
class DegeneracyReport:
    m_kappa: float
    boundary_class: BoundaryClass
    sup_location: float


def classify_kappa(kappa: KappaSpec) -> DegeneracyReport:
    """Compute the degeneracy measure m_kappa and the induced boundary class.

    Power laws give m_kappa = alpha exactly.  Tabulated coefficients are
    classified by maximizing x|kappa'|/kappa over the interior samples with a
    centered (three-point, nonuniform) finite difference; no interpolation
    refinement is attempted.
    """
    if isinstance(kappa, PowerLawKappa):
        m = float(kappa.alpha)
        loc = 1.0
    elif isinstance(kappa, TabulatedKappa):
        x, v = kappa.x, kappa.values
        hp = x[2:] - x[1:-1]
        hm = x[1:-1] - x[:-2]
        deriv = (
            v[2:] * hm**2 - v[:-2] * hp**2 + v[1:-1] * (hp**2 - hm**2)
        ) / (hp * hm * (hp + hm))
        ratio = x[1:-1] * np.abs(deriv) / v[1:-1]
        idx = int(np.argmax(ratio))
        m = float(ratio[idx])
        loc = float(x[1:-1][idx])
    else:
        raise CoefficientError(f"unsupported kappa specification {type(kappa).__name__}")
    if m >= 2.0:
        raise HypothesisViolationError(
            f"degeneracy measure m_kappa={m:.6g} violates the hypothesis m_kappa < 2"
        )
    cls = BoundaryClass.DIRICHLET_AT_ZERO if m < 1.0 else BoundaryClass.WEIGHTED_NEUMANN_AT_ZERO
    return DegeneracyReport(m_kappa=m, boundary_class=cls, sup_location=loc)


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable problem description.

    gamma is carried for the kernel oracle only; every stability-facing
    operation (operator assembly, simulation, resolvent scans) requires
    gamma = 0.
    """

    variant: Variant
    kappa: KappaSpec
    beta: float
    rho: float
    gamma: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError as exc:
            raise ConfigurationError(f"unknown variant {self.variant!r}") from exc
        if not (0.0 < self.beta < 1.0):
            raise ParameterError(f"beta must lie in (0,1), got beta={self.beta}")
        if not (self.rho > 0.0):
            raise ParameterError(f"rho must be positive, got rho={self.rho}")
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be >= 0, got gamma={self.gamma}")
        if self.variant is Variant.P:
            if not isinstance(self.kappa, PowerLawKappa) or not (0.0 < self.kappa.alpha < 1.0):
                raise ConfigurationError(
                    "variant P requires a power-law coefficient with alpha in (0,1)"
                )
        # validates the hypothesis m_kappa < 2 as a side effect
        classify_kappa(self.kappa)

    @property
    def alpha(self) -> Optional[float]:
        return self.kappa.alpha if isinstance(self.kappa, PowerLawKappa) else None

    @property
    def zeta(self) -> float:
        return self.rho * math.sin(self.beta * math.pi) / math.pi

    @property
    def nu_alpha(self) -> Optional[float]:
        a = self.alpha
        if a is None or not (0.0 < a < 1.0):
            return None
        return (1.0 - a) / (2.0 - a)

    @property
    def m_kappa(self) -> float:
        return self.degeneracy.m_kappa

    @property
    def degeneracy(self) -> DegeneracyReport:
        return classify_kappa(self.kappa)

    # -- serialization (derived fields are always recomputed) ---------------

    def to_json(self) -> dict:
        doc = {
            "variant": self.variant.value,
            "beta": self.beta,
            "rho": self.rho,
            "gamma": self.gamma,
        }
        if isinstance(self.kappa, PowerLawKappa):
            doc["alpha"] = self.kappa.alpha
        else:
            doc["kappa_samples"] = {
                "x": self.kappa.x.tolist(),
                "values": self.kappa.values.tolist(),
            }
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ProblemSpec":
        if "alpha" in doc and "kappa_samples" in doc:
            raise ConfigurationError("give either 'alpha' or 'kappa_samples', not both")
        if "alpha" in doc:
            kappa = PowerLawKappa(alpha=float(doc["alpha"]))
        elif "kappa_samples" in doc:
            ks = doc["kappa_samples"]
            kappa = TabulatedKappa(x=np.asarray(ks["x"], float), values=np.asarray(ks["values"], float))
        else:
            raise ConfigurationError("problem JSON needs 'alpha' or 'kappa_samples'")
        return cls(
            variant=Variant(doc["variant"]),
            kappa=kappa,
            beta=float(doc["beta"]),
            rho=float(doc["rho"]),
            gamma=float(doc.get("gamma", 0.0)),
        )


@dataclass(frozen=True)
class StateVector:
    """One point of the discrete state space: field values y plus modes psi."""

    y: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.complex128)
        psi = np.asarray(self.psi, dtype=np.complex128)
        if y.ndim != 1 or psi.ndim != 1:
            raise ShapeError("state components must be 1-d arrays")
        y.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "psi", psi)


def _check_compatible(state: StateVector, op) -> None:
    if state.y.size != op.xgrid.x.size or state.psi.size != op.xigrid.xi.size:
        raise ShapeError(
            f"state of shape ({state.y.size}, {state.psi.size}) does not match "
            f"operator grids ({op.xgrid.x.size}, {op.xigrid.xi.size})"
        )


def inner_product(a: StateVector, b: StateVector, op) -> complex:
    """Weighted scalar product sum h_i y_i conj(yb_i) + zeta sum w_k psi_k conj(psib_k)."""
    _check_compatible(a, op)
    _check_compatible(b, op)
    return complex(
        np.dot(op.xgrid.h, a.y * np.conj(b.y))
        + op.zeta * np.dot(op.xigrid.w, a.psi * np.conj(b.psi))
    )


def weighted_norm(state: StateVector, op) -> float:
    return math.sqrt(max(inner_product(state, state, op).real, 0.0))


def energy(state: StateVector, op) -> float:
    """Discrete energy 0.5 sum h|y|^2 + (zeta/2) sum w|psi|^2 = 0.5 ||Y||^2."""
    _check_compatible(state, op)
    val = 0.5 * (
        np.dot(op.xgrid.h, np.abs(state.y) ** 2)
        + op.zeta * np.dot(op.xigrid.w, np.abs(state.psi) ** 2)
    )
    return float(val)
