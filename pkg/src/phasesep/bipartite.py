"""Two-particle Gaussian states, their evolution, and separability tests.

Rotated (EPR) coordinates are ``K = (p1 - p2)/2``, ``X = x1 - x2``,
``P = (p1 + p2)/2``, ``Q = x1 + x2``; rotated vectors are ordered
``(K, X, P, Q)`` so that ``(K, X)`` and ``(P, Q)`` are the canonical pairs.
All functions here work in dimensionless units (hbar = m = D = 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .core import TOL, CovarianceMatrix2, GaussianState, NumericalDomainError, PhysicalParams, UNIT_PARAMS
from .dynamics import evolve_modes, noise_matrix, shear

# rotated = EPR_MAP @ (p1, x1, p2, x2)
EPR_MAP = np.array(
    [
        [0.5, 0.0, -0.5, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        [0.5, 0.0, 0.5, 0.0],
        [0.0, 1.0, 0.0, 1.0],
    ]
)
EPR_INVERSE = np.linalg.inv(EPR_MAP)

# Diffusion coefficient of the rotated pairs, in units of D.  The two-particle
# dynamics give D/2 for both K and P; NOMINAL reproduces the published
# rotated-coordinate equations (and their thresholds), which use D.
ROTATED_DIFFUSION_NOMINAL = 1.0
ROTATED_DIFFUSION_EXACT = 0.5

QUARTER = 0.25  # hbar^2 / 4 with hbar = 1


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class FactoredBipartiteState:
    """Product Gaussian in rotated coordinates, described by its four variances.

    ``sP2 == 0`` with ``sQ2 == inf`` is the algebraic limit of perfect
    momentum anti-correlation; it is accepted by the criteria but cannot be
    turned into a covariance matrix.
    """

    sK2: float
    sX2: float
    sP2: float
    sQ2: float
    units: str = "dimensionless"

    def __post_init__(self):
        for name in ("sK2", "sX2", "sP2", "sQ2"):
            v = getattr(self, name)
            if math.isnan(v) or v < 0:
                raise InvalidStateError(f"{name} must be a non-negative variance, got {v!r}")
        if self.units != "dimensionless":
            raise ValueError("factored states are handled in dimensionless units only")

    @property
    def is_limit(self) -> bool:
        return not all(math.isfinite(v) and v > 0 for v in (self.sK2, self.sX2, self.sP2, self.sQ2))

    def is_valid(self) -> bool:
        """Both canonical pairs obey the uncertainty principle."""
        return _pair_ok(self.sK2, self.sX2) and _pair_ok(self.sP2, self.sQ2)

    def to_gaussian(self) -> GaussianState:
        """The state in original coordinates (p1, x1, p2, x2)."""
        if self.is_limit:
            raise NumericalDomainError("algebraic-limit state has no finite covariance")
        rot = np.diag([self.sK2, self.sX2, self.sP2, self.sQ2])
        return GaussianState(np.zeros(4), EPR_INVERSE @ rot @ EPR_INVERSE.T)

    def to_dict(self) -> dict:
        return {"sK2": _num(self.sK2), "sX2": _num(self.sX2), "sP2": _num(self.sP2), "sQ2": _num(self.sQ2), "units": self.units}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FactoredBipartiteState":
        keys = ("sK2", "sX2", "sP2", "sQ2")
        for k in keys:
            if k not in d:
                raise KeyError(f"missing field {k!r}")
        unknown = set(d) - set(keys) - {"units"}
        if unknown:
            raise KeyError(f"unknown field(s) {sorted(unknown)}")
        vals = {}
        for k in keys:
            v = d[k]
            # null encodes an unbounded width
            vals[k] = math.inf if v is None else float(v)
        return cls(**vals, units=d.get("units", "dimensionless"))

    @classmethod
    def from_json(cls, text: str) -> "FactoredBipartiteState":
        return cls.from_dict(json.loads(text))


def _num(v: float):
    return v if math.isfinite(v) else None


def _product(a: float, b: float) -> float:
    # 0 * inf arises only for limit states; the finite factor decides
    if (a == 0 and math.isinf(b)) or (b == 0 and math.isinf(a)):
        return math.nan
    return a * b


def _pair_ok(a: float, b: float) -> bool:
    prod = _product(a, b)
    if math.isnan(prod):
        # limit state: the vanishing width sits with a diverging conjugate width
        return True
    return prod >= QUARTER - TOL


@dataclass(frozen=True)
class SeparationCertificate:
    t: float
    s: float
    B: CovarianceMatrix2
    detB: float
    valid: bool
    smeared_cov: np.ndarray | None = None

    @property
    def A_quarter(self) -> CovarianceMatrix2:
        return a_quarter(self.s)

    def to_dict(self) -> dict:
        d = {
            "t": self.t,
            "s": self.s,
            "B": self.B.matrix.tolist(),
            "detB": self.detB,
            "B_positive_definite": self.B.is_positive_definite(),
            "A_quarter": self.A_quarter.matrix.tolist(),
            "valid": self.valid,
        }
        if self.smeared_cov is not None:
            d["smeared_cov"] = np.asarray(self.smeared_cov).tolist()
        return d


def rotate_to_epr(state: GaussianState) -> GaussianState:
    """Change variables from (p1, x1, p2, x2) to (K, X, P, Q)."""
    if state.modes != 2:
        raise ValueError(f"rotate_to_epr expects a two-mode state, got {state.modes} modes")
    return GaussianState(EPR_MAP @ state.mean, EPR_MAP @ state.cov @ EPR_MAP.T, state.units)


def rotate_from_epr(state: GaussianState) -> GaussianState:
    if state.modes != 2:
        raise ValueError(f"rotate_from_epr expects a two-mode state, got {state.modes} modes")
    return GaussianState(EPR_INVERSE @ state.mean, EPR_INVERSE @ state.cov @ EPR_INVERSE.T, state.units)


def factor(rotated: GaussianState, atol: float = 1e-12) -> FactoredBipartiteState:
    """Read the four widths off a rotated state whose covariance is diagonal."""
    c = rotated.cov
    off = c - np.diag(np.diag(c))
    if np.abs(off).max() > atol * max(1.0, np.abs(c).max()):
        raise ValueError("state does not factor into independent K, X, P, Q widths")
    return FactoredBipartiteState(*np.diag(c).tolist())


def make_epr_state(c: float, sP2: float = 0.0, sQ2: float | None = None) -> FactoredBipartiteState:
    """Regularized EPR state with the (K, X) pair at minimum uncertainty.

    ``c`` is the K variance; the X variance is ``1/(4c)``.  When ``sQ2`` is
    omitted it saturates the (P, Q) pair, or diverges when ``sP2 == 0``.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if sQ2 is None:
        sQ2 = math.inf if sP2 == 0 else QUARTER / sP2
    return FactoredBipartiteState(c, QUARTER / c, sP2, sQ2)


def ph_interchange_test(state: FactoredBipartiteState) -> str:
    """``"separable"`` iff the state stays a Wigner function when P and K swap."""
    if not state.is_valid():
        raise InvalidStateError("input is not a valid Wigner state")
    return "separable" if ph_separable(state) else "entangled"


def ph_separable(state: FactoredBipartiteState) -> bool:
    return _pair_ok(state.sX2, state.sP2) and _pair_ok(state.sQ2, state.sK2) and not _limit_pair(state)


def _limit_pair(state: FactoredBipartiteState) -> bool:
    # a swapped pair made of a zero width and an infinite one is not a Wigner
    # function; _pair_ok only forgives that for the original pairing
    return math.isnan(_product(state.sX2, state.sP2)) or math.isnan(_product(state.sQ2, state.sK2))


def duan_lhs(state: FactoredBipartiteState) -> float:
    """``Var(X) + 4 Var(P)``; at least 2 for every separable state."""
    return state.sX2 + 4 * state.sP2


def duan_mirror_lhs(state: FactoredBipartiteState) -> float:
    """``Var(Q) + 4 Var(K)``, the same test on the other commuting pair."""
    return state.sQ2 + 4 * state.sK2


def duan_satisfied(state: FactoredBipartiteState) -> bool:
    return duan_lhs(state) >= 2 - TOL and duan_mirror_lhs(state) >= 2 - TOL


def _min_over_squeeze(a: float, b: float) -> float:
    """``min_l (l a + 4 b / l)`` over l > 0, found numerically on log l."""
    if a == 0 or b == 0:
        return 0.0 if not (math.isinf(a) or math.isinf(b)) else math.inf
    if math.isinf(a) or math.isinf(b):
        return math.inf
    res = minimize_scalar(
        lambda u: math.exp(u) * a + 4 * b * math.exp(-u),
        bracket=(-1.0, 1.0),
        method="brent",
        tol=1e-12,
    )
    return float(res.fun)


def duan_optimized_lhs(state: FactoredBipartiteState) -> tuple[float, float]:
    """Both Duan sums minimized over a common local squeeze of the two particles.

    Squeezing ``x_i -> l^(1/2) x_i, p_i -> l^(-1/2) p_i`` on both particles is
    local, so every member of the family must be ``>= 2`` for a separable
    state.  The minimized pair is the full criterion on factored states.
    """
    return _min_over_squeeze(state.sX2, state.sP2), _min_over_squeeze(state.sQ2, state.sK2)


def duan_class_separable(state: FactoredBipartiteState) -> bool:
    a, b = duan_optimized_lhs(state)
    return a >= 2 - 1e-9 and b >= 2 - 1e-9


def criterion_report(state: FactoredBipartiteState) -> dict:
    valid = state.is_valid()
    return {
        "wigner_valid": valid,
        "ph_separable": ph_separable(state) if valid else None,
        "duan_lhs": _num(duan_lhs(state)),
        "duan_mirror_lhs": _num(duan_mirror_lhs(state)),
    }


def evolve_epr(
    state: FactoredBipartiteState, t: float, rotated_diffusion: float = ROTATED_DIFFUSION_NOMINAL
) -> FactoredBipartiteState:
    """Variances of the rotated pairs after dimensionless time ``t``.

    Each pair moves like a free particle of mass 1/2 whose momentum diffuses
    with coefficient ``rotated_diffusion``.  Cross K-X and P-Q covariances
    that build up are not tracked.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    k = rotated_diffusion
    return FactoredBipartiteState(
        sK2=2 * k * t + state.sK2,
        sX2=8 * k * t**3 / 3 + 4 * state.sK2 * t**2 + state.sX2,
        sP2=2 * k * t + state.sP2,
        sQ2=8 * k * t**3 / 3 + 4 * state.sP2 * t**2 + state.sQ2,
    )


def evolve_bipartite(state: GaussianState, t: float, params: PhysicalParams = UNIT_PARAMS) -> GaussianState:
    """Evolve both particles under independent copies of the one-particle dynamics."""
    if state.modes != 2:
        raise ValueError(f"evolve_bipartite expects a two-mode state, got {state.modes} modes")
    return evolve_modes(state, t, params)


def a_quarter(s: float) -> CovarianceMatrix2:
    """Minimum-uncertainty covariance ``[[s, 1/2], [1/2, 1/(2s)]]``, determinant 1/4."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    return CovarianceMatrix2(s, 1 / (2 * s), 0.5)


def separation_certificate(t: float, s: float, state: GaussianState | None = None) -> SeparationCertificate:
    """Split ``A(t) = A_1/4(s) + B`` and test whether ``g(.; B)`` is a Wigner function.

    When valid, any two-particle state at time ``t`` is a mixture of
    products of ``g(.; B)`` Gaussians weighted by the positive smeared initial
    state.  If ``state`` is given, that smeared covariance is recorded.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    Aq = a_quarter(s)
    B = noise_matrix(t) - Aq
    detB = B.det
    valid = bool(detB >= QUARTER and B.is_positive_definite())
    smeared = None
    if state is not None:
        n = state.modes
        S = np.kron(np.eye(n), shear(t))
        smeared = S @ state.cov @ S.T + np.kron(np.eye(n), Aq.matrix)
    return SeparationCertificate(t=t, s=s, B=B, detB=detB, valid=valid, smeared_cov=smeared)


def reduce_to_one_particle(cert: SeparationCertificate, state: GaussianState) -> GaussianState:
    """Particle-1 marginal at the certificate time, built as the initial
    marginal sheared, smeared by ``A_1/4`` and then by ``B``."""
    if not cert.valid:
        raise ValueError("certificate is not valid; no separable decomposition at this time")
    if state.modes != 2:
        raise ValueError("reduce_to_one_particle expects a two-mode state")
    m0 = state.marginal(0)
    S = shear(cert.t)
    cov = S @ m0.cov @ S.T + cert.A_quarter.matrix + cert.B.matrix
    return GaussianState(S @ m0.mean, cov, state.units)


def earliest_valid_certificate(s: float, t_max: float = 20.0, step: float = 1e-2, xtol: float = 1e-12) -> float:
    """First time at which the certificate verdict turns valid and stays so up to ``t_max``.

    Works on the verdict alone: a scan locates the last invalid-to-valid
    switch, then bisection on the boolean sharpens it.
    """
    ts = np.arange(step, t_max + step / 2, step)
    verdicts = [separation_certificate(float(t), s).valid for t in ts]
    if not verdicts[-1]:
        raise NumericalDomainError(f"certificate not valid by t={t_max} for s={s}")
    if all(verdicts):
        lo, hi = 0.0, float(ts[0])
    else:
        last_bad = max(i for i, v in enumerate(verdicts) if not v)
        lo, hi = float(ts[last_bad]), float(ts[last_bad + 1])
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mid > 0 and separation_certificate(mid, s).valid:
            hi = mid
        else:
            lo = mid
    return hi
