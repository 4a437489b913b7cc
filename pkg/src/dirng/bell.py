"""Two-party binary-setting/binary-outcome boxes and Bell functionals.

Conventions
-----------
A behavior is the conditional distribution p(a,b|x,y) with outcomes
a,b in {0,1} and settings x,y in {0,1}, stored as an array indexed
``p[a, b, x, y]``.  Correlators are

    C(x,y) = p(00|xy) + p(11|xy) - p(01|xy) - p(10|xy),

and a Bell expression is the linear functional sum_xy c[x,y] * C(x,y).

The noisy two-qubit source is modeled by real-plane projective
measurements on a maximally entangled state mixed with white noise:
C(x,y) = v * cos(2*(theta_Ax - theta_By)), all single-party marginals
equal to 1/2.  The sign convention is fixed so that the canonical angles
(0, pi/4) / (pi/8, -pi/8) give CHSH = +2*sqrt(2) at v = 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NORMALIZATION_TOL = 1e-12
NO_SIGNALING_TOL = 1e-9

#: Angles (theta_A0, theta_A1, theta_B0, theta_B1) maximizing CHSH at v=1.
CANONICAL_ANGLES = (0.0, math.pi / 4, math.pi / 8, -math.pi / 8)


class BellError(ValueError):
    """Invalid behavior, expression or model input."""


class TargetUnreachableError(BellError):
    """Requested Bell value exceeds what the model can reach at v=1."""


@dataclass(frozen=True)
class Behavior:
    """Conditional outcome distribution ``p[a, b, x, y]`` of a two-party box."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        if arr.shape != (2, 2, 2, 2):
            raise BellError(f"behavior must have shape (2,2,2,2), got {arr.shape}")
        object.__setattr__(self, "p", arr)

    def validate(self, check_no_signaling: bool = True) -> None:
        if np.any(self.p < -NORMALIZATION_TOL) or np.any(self.p > 1 + NORMALIZATION_TOL):
            raise BellError("probabilities outside [0, 1]")
        totals = self.p.sum(axis=(0, 1))
        if np.max(np.abs(totals - 1.0)) > NORMALIZATION_TOL:
            raise BellError("distribution not normalized per setting pair")
        if check_no_signaling and self.no_signaling_deviation() > NO_SIGNALING_TOL:
            raise BellError("behavior is signaling")

    def no_signaling_deviation(self) -> float:
        """Largest change of a single-party marginal across the other party's setting."""
        marg_a = self.p.sum(axis=1)          # [a, x, y]
        marg_b = self.p.sum(axis=0)          # [b, x, y]
        dev_a = np.abs(marg_a[:, :, 0] - marg_a[:, :, 1]).max()
        dev_b = np.abs(marg_b[:, 0, :] - marg_b[:, 1, :]).max()
        return float(max(dev_a, dev_b))

    @staticmethod
    def uniform() -> "Behavior":
        return Behavior(np.full((2, 2, 2, 2), 0.25))


@dataclass(frozen=True)
class BellExpression:
    """Correlator coefficients ``c[x, y]`` of a Bell functional."""

    name: str
    c: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.c, dtype=float)
        if arr.shape != (2, 2):
            raise BellError(f"expression needs a 2x2 coefficient matrix, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise BellError("coefficients must be finite")
        object.__setattr__(self, "c", arr)

    @property
    def abs_coeff_sum(self) -> float:
        """Algebraic bound sum |c_xy|; |bell value| never exceeds it."""
        return float(np.abs(self.c).sum())

    @property
    def max_abs_coeff(self) -> float:
        return float(np.abs(self.c).max())


CHSH = BellExpression("chsh", np.array([[1.0, 1.0], [1.0, -1.0]]))

#: Weighted-correlator expression tuned for high certified randomness at
#: moderate violation (classical bound 5.0006).
WEIGHTED = BellExpression(
    "weighted", np.array([[1.0, 2.0126], [2.0126, -1.9754]])
)

_BUILTIN_EXPRESSIONS = {"chsh": CHSH, "weighted": WEIGHTED, "eq2": WEIGHTED}


@dataclass(frozen=True)
class QuantumModel:
    """Noisy singlet-type source: visibility plus four measurement angles."""

    visibility: float
    angles: tuple[float, float, float, float] = CANONICAL_ANGLES

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise BellError(f"visibility must be in [0, 1], got {self.visibility}")
        if len(self.angles) != 4 or not all(math.isfinite(t) for t in self.angles):
            raise BellError("need four finite angles (theta_A0, theta_A1, theta_B0, theta_B1)")
        object.__setattr__(self, "angles", tuple(float(t) for t in self.angles))


def correlator(beh: Behavior, x: int, y: int) -> float:
    p = beh.p
    return float(p[0, 0, x, y] + p[1, 1, x, y] - p[0, 1, x, y] - p[1, 0, x, y])


def bell_value(expr: BellExpression, beh: Behavior) -> float:
    return float(sum(expr.c[x, y] * correlator(beh, x, y)
                     for x in (0, 1) for y in (0, 1)))


def classical_bound(expr: BellExpression) -> float:
    """Maximum over the 16 deterministic strategies a_x, b_y in {+-1}."""
    best = -math.inf
    for bits in range(16):
        a = (1 if bits & 1 else -1, 1 if bits & 2 else -1)
        b = (1 if bits & 4 else -1, 1 if bits & 8 else -1)
        val = sum(expr.c[x, y] * a[x] * b[y] for x in (0, 1) for y in (0, 1))
        best = max(best, val)
    return float(best)


def deterministic_behavior(a0: int, a1: int, b0: int, b1: int) -> Behavior:
    """Box where party outcomes are fixed per setting (outcomes in {0,1})."""
    p = np.zeros((2, 2, 2, 2))
    a = (a0, a1)
    b = (b0, b1)
    for x in (0, 1):
        for y in (0, 1):
            p[a[x], b[y], x, y] = 1.0
    return Behavior(p)


def model_correlators(model: QuantumModel) -> np.ndarray:
    ta0, ta1, tb0, tb1 = model.angles
    ta = (ta0, ta1)
    tb = (tb0, tb1)
    c = np.empty((2, 2))
    for x in (0, 1):
        for y in (0, 1):
            c[x, y] = model.visibility * math.cos(2.0 * (ta[x] - tb[y]))
    return c


def behavior_from_model(model: QuantumModel) -> Behavior:
    """p(a,b|x,y) = (1 + (-1)^(a xor b) * C(x,y)) / 4, unbiased marginals."""
    corr = model_correlators(model)
    p = np.empty((2, 2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            sign = 1.0 if a == b else -1.0
            p[a, b] = (1.0 + sign * corr) / 4.0
    return Behavior(p)


def visibility_for_target(expr: BellExpression,
                          angles: tuple[float, float, float, float],
                          target: float) -> float:
    """Visibility v with bell_value(expr, model(v, angles)) == target.

    The value is linear in v, so v = target / value(v=1).  Raises
    TargetUnreachableError when the target exceeds the v=1 value (or the
    v=1 value is not positive while a positive target is requested).
    """
    full = bell_value(expr, behavior_from_model(QuantumModel(1.0, angles)))
    if full <= 0.0:
        raise TargetUnreachableError(
            f"angles give non-positive value {full:.6g} at v=1; cannot scale to {target:.6g}")
    v = target / full
    if v > 1.0 + 1e-12:
        raise TargetUnreachableError(
            f"target {target:.6g} exceeds the v=1 value {full:.6g} for these angles")
    if v < 0.0:
        raise TargetUnreachableError(f"target {target:.6g} must be non-negative")
    return min(v, 1.0)


def optimize_angles(expr: BellExpression, coarse: int = 16,
                    refine_rounds: int = 60) -> tuple[tuple[float, float, float, float], float]:
    """Angles maximizing the v=1 Bell value: coarse grid plus local refinement.

    theta_A0 is pinned to 0 (a global rotation leaves every correlator
    unchanged).  Returns (angles, value).
    """
    grid = [math.pi * k / coarse for k in range(coarse)]

    def value(ts):
        m = QuantumModel(1.0, ts)
        return bell_value(expr, behavior_from_model(m))

    best = (0.0, 0.0, 0.0, 0.0)
    best_val = value(best)
    for ta1 in grid:
        for tb0 in grid:
            for tb1 in grid:
                cand = (0.0, ta1, tb0, tb1)
                v = value(cand)
                if v > best_val:
                    best, best_val = cand, v

    # coordinate golden-section passes around the best grid point
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    step = math.pi / coarse
    angles = list(best)
    for _ in range(refine_rounds):
        improved = False
        for i in (1, 2, 3):
            lo, hi = angles[i] - step, angles[i] + step

            def f(t, i=i):
                trial = angles.copy()
                trial[i] = t
                return -value(tuple(trial))

            c = hi - invphi * (hi - lo)
            d = lo + invphi * (hi - lo)
            fc, fd = f(c), f(d)
            while hi - lo > 1e-10:
                if fc < fd:
                    hi, d, fd = d, c, fc
                    c = hi - invphi * (hi - lo)
                    fc = f(c)
                else:
                    lo, c, fc = c, d, fd
                    d = lo + invphi * (hi - lo)
                    fd = f(d)
            t = 0.5 * (lo + hi)
            if value(tuple(angles[:i] + [t] + angles[i + 1:])) > value(tuple(angles)):
                angles[i] = t
                improved = True
        step *= 0.5
        if not improved and step < 1e-10:
            break
    final = tuple(angles)
    return final, value(final)


def expression_from_json(source) -> BellExpression:
    """Load an expression from a dict, JSON string or file path.

    Document shape: {"name": str, "coefficients": [[c00, c01], [c10, c11]]}.
    Built-in names ("chsh", "weighted"/"eq2") are also accepted.
    """
    if isinstance(source, BellExpression):
        return source
    if isinstance(source, str) and source.lower() in _BUILTIN_EXPRESSIONS:
        return _BUILTIN_EXPRESSIONS[source.lower()]
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise BellError(f"unknown expression or missing file: {source}")
        doc = json.loads(path.read_text())
    elif isinstance(source, dict):
        doc = source
    else:
        raise BellError(f"cannot load expression from {type(source).__name__}")
    try:
        name = doc["name"]
        coeffs = doc["coefficients"]
    except (KeyError, TypeError) as exc:
        raise BellError(f"malformed expression document: {exc}") from exc
    return BellExpression(str(name), np.asarray(coeffs, dtype=float))
