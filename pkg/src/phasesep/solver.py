"""Disentanglement-time conditions and their thresholds.

Every condition is a cubic inequality ``c3 t^3 + c2 t^2 + c1 t + c0 >= rhs``
in dimensionless time.  The threshold is the earliest time after which the
inequality holds for good; it is found by isolating the real roots between
the critical points of the cubic and bisecting each bracket.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bipartite import ROTATED_DIFFUSION_NOMINAL
from .core import NumericalDomainError, PhysicalParams, UNIT_PARAMS

PRECISION_ENV = "PHASESEP_PRECISION"


@dataclass(frozen=True)
class Tolerances:
    xtol: float = 1e-12  # bisection width on t
    sweep_step: float = 1e-3
    sweep_max: float = 100.0
    s_step: float = 1e-3  # coarse scan of s
    s_tol: float = 1e-6
    residual: float = 1e-9


STRICT = Tolerances()
FAST = Tolerances(xtol=1e-10, sweep_step=1e-2, s_step=1e-2, s_tol=1e-5)


def tolerances() -> Tolerances:
    """Tolerances selected by ``PHASESEP_PRECISION`` (``strict`` by default)."""
    mode = os.environ.get(PRECISION_ENV, "strict").strip().lower()
    if mode == "strict":
        return STRICT
    if mode == "fast":
        return FAST
    raise ValueError(f"{PRECISION_ENV} must be 'fast' or 'strict', got {mode!r}")


@dataclass(frozen=True)
class CubicCondition:
    coefficients: tuple[float, float, float, float]  # (c3, c2, c1, c0)
    rhs: float = 0.0
    description: str = ""

    def __post_init__(self):
        if len(self.coefficients) != 4:
            raise ValueError("a cubic condition needs four coefficients")
        if not self.coefficients[0] > 0:
            raise ValueError("leading coefficient must be positive")

    def value(self, t):
        """``lhs(t) - rhs``; the condition holds where this is non-negative."""
        c3, c2, c1, c0 = self.coefficients
        return ((c3 * t + c2) * t + c1) * t + (c0 - self.rhs)

    def holds(self, t) -> bool:
        return bool(self.value(t) >= 0)


@dataclass(frozen=True)
class ThresholdResult:
    t_bar: float
    parameter: float | None
    residual: float
    already_satisfied: bool = False
    description: str = ""
    extra: dict = field(default_factory=dict)

    def t_physical(self, params: PhysicalParams = UNIT_PARAMS) -> float:
        return self.t_bar * math.sqrt(params.hbar * params.mass / params.diffusion)

    @property
    def factor(self) -> float:
        """Threshold in units of ``sqrt(hbar m / (2 D))``."""
        return self.t_bar * math.sqrt(2.0)

    def report(self, params: PhysicalParams = UNIT_PARAMS) -> dict:
        out = {
            "t_bar": self.t_bar,
            "parameter": self.parameter,
            "residual": self.residual,
            "t_physical": self.t_physical(params),
            "factor": self.factor,
            "already_satisfied": self.already_satisfied,
            "params": params.as_dict(),
            "condition": self.description,
        }
        out.update(self.extra)
        return out


def general_condition(s: float) -> CubicCondition:
    """Certificate condition ``t^3/3 - (2s/3) t^2 + t - 1/s >= 0``."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    return CubicCondition((1 / 3, -2 * s / 3, 1.0, -1 / s), 0.0, f"general(s={s!r})")


def epr_condition(
    c: float,
    sP2: float = 0.0,
    sX2: float | None = None,
    rotated_diffusion: float = ROTATED_DIFFUSION_NOMINAL,
) -> CubicCondition:
    """Duan condition ``Var(X)_t + 4 Var(P)_t >= 2`` for the evolved EPR state.

    ``sX2=None`` saturates the uncertainty relation, ``sX2 = 1/(4c)``.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if sP2 < 0:
        raise ValueError(f"sP2 must be non-negative, got {sP2}")
    x0 = 1 / (4 * c) if sX2 is None else float(sX2)
    k = rotated_diffusion
    return CubicCondition(
        (8 * k / 3, 4 * c, 8 * k, x0 + 4 * sP2),
        2.0,
        f"epr(c={c!r}, sP2={sP2!r}, sX2={'saturated' if sX2 is None else repr(sX2)})",
    )


def epr_envelope_condition(sP2: float = 0.0, rotated_diffusion: float = ROTATED_DIFFUSION_NOMINAL) -> CubicCondition:
    """EPR condition minimized over c at each t (minimizer ``c = 1/(4t)``)."""
    k = rotated_diffusion
    return CubicCondition((8 * k / 3, 0.0, 8 * k + 2, 4 * sP2), 2.0, f"epr-envelope(sP2={sP2!r})")


def _bisect(f, lo: float, hi: float, xtol: float) -> float:
    flo = f(lo)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def real_roots(cond: CubicCondition, lo: float = 0.0, xtol: float = 1e-12) -> list[tuple[float, int]]:
    """Sign-changing real roots of ``cond.value`` in ``[lo, inf)``.

    Returns ``(root, direction)`` pairs, direction +1 where the value turns
    non-negative.  Brackets are the monotone pieces between critical points.
    """
    c3, c2, c1, _ = cond.coefficients
    c0 = cond.coefficients[3] - cond.rhs
    bound = 1 + max(abs(c2), abs(c1), abs(c0)) / c3  # Cauchy bound on |root|
    disc = (2 * c2) ** 2 - 12 * c3 * c1
    crit = []
    if disc > 0:
        r = math.sqrt(disc)
        crit = sorted(((-2 * c2 - r) / (6 * c3), (-2 * c2 + r) / (6 * c3)))
    knots = [lo] + [x for x in crit if lo < x < bound] + [max(bound, lo + 1.0)]
    f = cond.value
    roots = []
    for a, b in zip(knots[:-1], knots[1:]):
        fa, fb = f(a), f(b)
        if fa < 0 <= fb:
            roots.append((b if fb == 0 else _bisect(f, a, b, xtol), +1))
        elif fb < 0 <= fa:
            roots.append((a if fa == 0 else _bisect(f, a, b, xtol), -1))
    return roots


def threshold(cond: CubicCondition, verify: bool = True, tol: Tolerances | None = None) -> ThresholdResult:
    """Earliest ``t >= 0`` after which ``cond`` holds for all later times."""
    tol = tol or tolerances()
    f = cond.value
    ups = [r for r, d in real_roots(cond, 0.0, tol.xtol) if d > 0]
    if ups:
        t_bar, already = ups[-1], False
        residual = abs(f(t_bar))
    elif f(0.0) >= 0:
        t_bar, residual, already = 0.0, 0.0, True
    else:
        raise NumericalDomainError(f"no crossing found for {cond.description}")
    if residual > tol.residual:
        raise NumericalDomainError(f"root residual {residual:.3g} exceeds {tol.residual:g} for {cond.description}")
    if verify:
        _forward_sweep(cond, t_bar, tol)
    return ThresholdResult(t_bar, None, residual, already, cond.description)


def _forward_sweep(cond: CubicCondition, t0: float, tol: Tolerances):
    grid = np.arange(t0, tol.sweep_max + tol.sweep_step / 2, tol.sweep_step)[1:]
    vals = cond.value(grid)
    if grid.size and vals.min() < -tol.residual:
        bad = grid[int(np.argmin(vals))]
        raise NumericalDomainError(f"condition {cond.description} fails again at t={bad:.6g} after threshold {t0:.12g}")


def general_threshold(s: float, verify: bool = True, tol: Tolerances | None = None) -> ThresholdResult:
    r = threshold(general_condition(s), verify, tol)
    return ThresholdResult(r.t_bar, s, r.residual, r.already_satisfied, r.description)


def optimize_s(s_lo: float = 0.5, s_hi: float = 1.5, tol: Tolerances | None = None) -> tuple[float, ThresholdResult]:
    """Minimize the general threshold over ``s`` by coarse scan then golden section."""
    if not (0 < s_lo < s_hi):
        raise ValueError(f"need 0 < s_lo < s_hi, got [{s_lo}, {s_hi}]")
    tol = tol or tolerances()
    n = max(2, int(round((s_hi - s_lo) / tol.s_step)) + 1)
    grid = np.linspace(s_lo, s_hi, n)
    ts = np.array([general_threshold(float(s), verify=False, tol=tol).t_bar for s in grid])
    i = int(np.argmin(ts))  # argmin keeps the smallest s on ties
    if 0 < i < n - 1:
        res = minimize_scalar(
            lambda s: general_threshold(s, verify=False, tol=tol).t_bar,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            tol=tol.s_tol / max(grid[i], 1.0),
        )
        s_star = float(res.x)
    else:
        s_star = float(grid[i])
    best = general_threshold(s_star, verify=True, tol=tol)
    return s_star, best


def epr_threshold(
    c: float, sP2: float = 0.0, rotated_diffusion: float = ROTATED_DIFFUSION_NOMINAL, verify: bool = True, tol=None
) -> ThresholdResult:
    r = threshold(epr_condition(c, sP2, rotated_diffusion=rotated_diffusion), verify, tol)
    return ThresholdResult(r.t_bar, c, r.residual, r.already_satisfied, r.description)


def worst_case_epr(
    sP2: float = 0.0, rotated_diffusion: float = ROTATED_DIFFUSION_NOMINAL, tol: Tolerances | None = None
) -> tuple[float, ThresholdResult]:
    """Largest EPR threshold over all ``c > 0``, with the ``c`` attaining it.

    At fixed ``t`` the condition is smallest at ``c = 1/(4t)``, so the
    uniform threshold is the root of the envelope cubic.
    """
    r = threshold(epr_envelope_condition(sP2, rotated_diffusion), True, tol)
    if r.t_bar == 0:
        raise NumericalDomainError("EPR family is Duan-separable from the start")
    c_star = 1 / (4 * r.t_bar)
    return c_star, ThresholdResult(r.t_bar, c_star, r.residual, False, r.description)
