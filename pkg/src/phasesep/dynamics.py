"""Closed-form evolution of Gaussian states under free high-temperature dynamics.

The Wigner function obeys ``dW/dt = -(p/m) dW/dx + D d^2W/dp^2``.  Its
solution is a free-streaming shear of the initial state followed by
convolution with the noise Gaussian ``g(.; A(t))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .core import UNIT_PARAMS, CovarianceMatrix2, GaussianState, PhysicalParams

TRAJECTORY_HEADER = ("t", "mean_p", "mean_x", "cov_pp", "cov_px", "cov_xx", "det_cov")


@dataclass(frozen=True)
class PropagatorCoefficients:
    alpha: float
    beta: float
    epsilon: float

    @property
    def half_inverse(self) -> np.ndarray:
        return np.array([[self.alpha, self.epsilon / 2], [self.epsilon / 2, self.beta]])


@dataclass(frozen=True)
class DimensionlessScaling:
    t_scale: float
    p_scale: float
    x_scale: float

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "DimensionlessScaling":
        h, m, D = params.hbar, params.mass, params.diffusion
        return cls(
            t_scale=math.sqrt(h * m / D),
            p_scale=(h * m * D) ** 0.25,
            x_scale=(h**3 / (m * D)) ** 0.25,
        )

    def scale(self, kind: str) -> float:
        try:
            return {"time": self.t_scale, "momentum": self.p_scale, "position": self.x_scale}[kind]
        except KeyError:
            raise ValueError(f"unknown kind {kind!r}; expected time, momentum or position") from None


def propagator_coefficients(t: float, params: PhysicalParams = UNIT_PARAMS) -> PropagatorCoefficients:
    """Exponent coefficients of the Wigner propagator,
    ``K ~ exp(-alpha dp^2 - beta dx^2 - epsilon dp dx)``."""
    if not t > 0:
        raise ValueError(f"propagator is singular at t <= 0 (t={t})")
    m, D = params.mass, params.diffusion
    return PropagatorCoefficients(
        alpha=1.0 / (D * t),
        beta=3.0 * m**2 / (D * t**3),
        epsilon=-3.0 * m / (D * t**2),
    )


def noise_matrix(t: float, params: PhysicalParams = UNIT_PARAMS) -> CovarianceMatrix2:
    """Noise covariance ``A(t) = D t [[2, t/m], [t/m, 2 t^2 / (3 m^2)]]``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    m, D = params.mass, params.diffusion
    return CovarianceMatrix2(2 * D * t, 2 * D * t**3 / (3 * m**2), D * t**2 / m)


def shear(t: float, params: PhysicalParams = UNIT_PARAMS) -> np.ndarray:
    """Free-streaming map ``(p, x) -> (p, x + p t / m)``."""
    return np.array([[1.0, 0.0], [t / params.mass, 1.0]])


def _check_units(state: GaussianState, params: PhysicalParams):
    if state.units == "dimensionless" and not params.is_unit:
        raise ValueError("dimensionless state evolved with non-unit physical parameters")


def evolve_modes(state: GaussianState, t: float, params: PhysicalParams = UNIT_PARAMS) -> GaussianState:
    """Evolve every mode of an n-mode state independently."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    _check_units(state, params)
    n = state.modes
    S = np.kron(np.eye(n), shear(t, params))
    A = np.kron(np.eye(n), noise_matrix(t, params).matrix)
    return GaussianState(S @ state.mean, S @ state.cov @ S.T + A, state.units)


def evolve(state: GaussianState, t: float, params: PhysicalParams = UNIT_PARAMS) -> GaussianState:
    """Evolve a one-mode state: drifted mean, ``S C0 S^T + A(t)`` covariance."""
    if state.modes != 1:
        raise ValueError("evolve expects a one-mode state; use evolve_bipartite for two modes")
    return evolve_modes(state, t, params)


def variances(state0: GaussianState, t: float, params: PhysicalParams = UNIT_PARAMS) -> tuple[float, float]:
    """``(Delta p_t^2, Delta x_t^2)`` from the explicit variance-growth formulas."""
    m, D = params.mass, params.diffusion
    c = state0.mode_cov(0)
    dp2 = 2 * D * t + c.spp
    dx2 = 2 * D * t**3 / (3 * m**2) + c.spp * t**2 / m**2 + 2 * t * c.spx / m + c.sxx
    return dp2, dx2


def to_dimensionless(value: float, kind: str, params: PhysicalParams) -> float:
    return value / DimensionlessScaling.from_params(params).scale(kind)


def from_dimensionless(value: float, kind: str, params: PhysicalParams) -> float:
    return value * DimensionlessScaling.from_params(params).scale(kind)


def state_to_dimensionless(state: GaussianState, params: PhysicalParams) -> GaussianState:
    if state.units == "dimensionless":
        return state
    sc = DimensionlessScaling.from_params(params)
    d = np.tile([1 / sc.p_scale, 1 / sc.x_scale], state.modes)
    return GaussianState(d * state.mean, state.cov * np.outer(d, d), "dimensionless")


def state_to_si(state: GaussianState, params: PhysicalParams) -> GaussianState:
    if state.units == "si":
        return state
    sc = DimensionlessScaling.from_params(params)
    d = np.tile([sc.p_scale, sc.x_scale], state.modes)
    return GaussianState(d * state.mean, state.cov * np.outer(d, d), "si")


def trajectory(state: GaussianState, times: Iterable[float], params: PhysicalParams = UNIT_PARAMS):
    """Sample the closed-form evolution at the given times."""
    return [(float(t), evolve(state, t, params)) for t in times]


def write_trajectory_csv(rows, out: TextIO | None = None) -> str:
    """Write ``(t, state)`` pairs as CSV with full double precision."""
    buf = out if out is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for t, s in rows:
        c = s.mode_cov(0)
        w.writerow([fmt_float(v) for v in (t, s.mean[0], s.mean[1], c.spp, c.spx, c.sxx, c.det)])
    return buf.getvalue() if out is None else ""


def fmt_float(v: float) -> str:
    return format(float(v), ".17g") if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
