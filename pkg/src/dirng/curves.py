"""Certified-entropy curves and affine tradeoff functions.

A curve maps Bell value S to certified bits per round h(S).  Curves are
data: they are produced by external semidefinite computations (NPA for
min-entropy, Gauss-Radau quadrature relaxations for von Neumann entropy)
and ingested here as tabulated points.  Two families ship built in, for
CHSH and for the weighted expression; the von Neumann Radau-8 column is
the default used by the finite-size engine.

Evaluation interpolates the tabulated points, clamped at the top and
anchored to zero at the classical bound when the table starts above it.
Tradeoff construction uses
the lower convex envelope of the points: an affine g(S) = mu + lambda*S
supporting the envelope at an anchor never exceeds any tabulated value,
which is what the accumulation bound requires, together with its
spot-checking statistics Max/Min/MinSigma/Var for a given test-round
probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .bell import BellExpression, classical_bound, CHSH, WEIGHTED

#: Tabulated points may exceed their lower convex envelope by at most this
#: much (published tables are rounded; beyond this the data is rejected).
CONVEXITY_TOL = 5e-4

#: Default anchor position as a quantile of the tabulated Bell range.
#: High anchors give steep, conservative tradeoffs; the optimizer can
#: sweep anchors when a tighter bound is wanted.
DEFAULT_ANCHOR_QUANTILE = 0.8

MIN_ENTROPY = "min_entropy"
VON_NEUMANN = "von_neumann"


class CurveError(ValueError):
    """Malformed or invalid entropy-curve data."""


class AnchorRangeError(CurveError):
    """Tangent anchor outside the tabulated Bell-value range."""


# (events/s, S, h_min, vne_radau6, vne_radau8) rows of the built-in tables.
WEIGHTED_TABLE_ROWS = (
    (28000, 4.95151, 0.0, 0.0, 0.0),
    (24000, 5.00247, 0.0098, 0.0186, 0.0186),
    (20000, 5.02311, 0.1231, 0.2234, 0.2244),
    (16000, 5.03036, 0.1651, 0.2953, 0.2965),
    (12000, 5.04098, 0.2289, 0.4007, 0.4024),
    (8000, 5.08671, 0.5413, 0.8545, 0.858),
)

CHSH_TABLE_ROWS = (
    (70000, 2.65022, 0.5198, 0.8909, 0.8964),
    (50000, 2.67602, 0.5638, 0.9497, 0.9574),
    (36000, 2.70257, 0.6148, 1.0156, 1.0239),
    (20000, 2.71497, 0.6411, 1.0483, 1.0566),
    (12000, 2.73685, 0.6925, 1.1092, 1.1177),
    (8000, 2.74428, 0.7117, 1.1309, 1.1397),
    (4000, 2.76091, 0.7591, 1.1831, 1.1917),
)


def _lower_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Lower convex hull of points already sorted by strictly increasing S."""
    hull: list[tuple[float, float]] = []
    for p in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] if it lies on or above the chord hull[-2] -> p
            if (x2 - x1) * (p[1] - y1) <= (p[0] - x1) * (y2 - y1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


@dataclass(frozen=True)
class EntropyCurve:
    """Tabulated certified entropy vs Bell value for one expression."""

    expression_name: str
    kind: str
    points: tuple[tuple[float, float], ...]
    classical_bound: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in (MIN_ENTROPY, VON_NEUMANN):
            raise CurveError(f"unknown curve kind {self.kind!r}")
        pts = tuple((float(s), float(h)) for s, h in self.points)
        if len(pts) < 2:
            raise CurveError("curve needs at least 2 points")
        for (s1, h1), (s2, h2) in zip(pts, pts[1:]):
            if s2 <= s1:
                raise CurveError("Bell values must be strictly increasing")
            if h2 < h1:
                raise CurveError("certified entropy must be non-decreasing in the Bell value")
        if any(h < 0 for _, h in pts):
            raise CurveError("certified entropy must be non-negative")
        hull = _lower_hull(list(pts))
        excess = max(h - _interp(hull, s) for s, h in pts)
        if excess > CONVEXITY_TOL:
            raise CurveError(
                f"points exceed their convex envelope by {excess:.2e} (> {CONVEXITY_TOL:.0e})")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_hull", hull)

    @property
    def s_min(self) -> float:
        return self.points[0][0]

    @property
    def s_max(self) -> float:
        return self.points[-1][0]

    @property
    def envelope_vertices(self) -> tuple[tuple[float, float], ...]:
        return tuple(self._hull)

    def value_at(self, s: float) -> float:
        """Certified bits per round at Bell value s.

        Piecewise-linear in the tabulated points; clamped to the last
        value above the table.  When the table starts above the classical
        bound the curve is extended down to (classical_bound, 0), so
        certification dies out exactly at the bound; below the extended
        range the value clamps to the lowest tabulated entropy.
        """
        cb = self.classical_bound
        pts = list(self.points)
        if cb is not None and cb < self.s_min:
            pts = [(cb, 0.0)] + pts
        if s <= pts[0][0]:
            return pts[0][1]
        if s >= pts[-1][0]:
            return pts[-1][1]
        return _interp(pts, s)

    def default_anchor(self) -> float:
        return self.s_min + DEFAULT_ANCHOR_QUANTILE * (self.s_max - self.s_min)

    def tangent_at(self, anchor: float, expr: BellExpression, gamma: float) -> "MinTradeoff":
        """Supporting line of the convex envelope at the anchor, with
        spot-checking statistics for test-round probability gamma.

        At an envelope vertex the left segment's slope is used (the right
        segment at the first vertex, where no left segment exists).
        """
        if not 0.0 < gamma <= 1.0:
            raise CurveError(f"gamma must be in (0, 1], got {gamma}")
        if not self.s_min - 1e-12 <= anchor <= self.s_max + 1e-12:
            raise AnchorRangeError(
                f"anchor {anchor:.6g} outside tabulated range "
                f"[{self.s_min:.6g}, {self.s_max:.6g}]")
        hull = self._hull
        slope = None
        for k, (s, h) in enumerate(hull):
            if abs(anchor - s) <= 1e-12:
                lo, hi = (0, 1) if k == 0 else (k - 1, k)
                slope = (hull[hi][1] - hull[lo][1]) / (hull[hi][0] - hull[lo][0])
                break
        if slope is None:
            for k in range(len(hull) - 1):
                if hull[k][0] < anchor < hull[k + 1][0]:
                    slope = (hull[k + 1][1] - hull[k][1]) / (hull[k + 1][0] - hull[k][0])
                    break
        if slope is None:  # anchor within tolerance of an endpoint
            k = 0 if anchor < hull[0][0] else len(hull) - 1
            lo, hi = (0, 1) if k == 0 else (k - 1, k)
            slope = (hull[hi][1] - hull[lo][1]) / (hull[hi][0] - hull[lo][0])
        intercept = _interp(hull, min(max(anchor, hull[0][0]), hull[-1][0])) - slope * anchor
        return MinTradeoff.from_line(slope, intercept, anchor, expr, gamma,
                                     curve_classical_bound=self.classical_bound)


def _interp(pts: list[tuple[float, float]], s: float) -> float:
    for (s1, h1), (s2, h2) in zip(pts, pts[1:]):
        if s1 <= s <= s2:
            t = (s - s1) / (s2 - s1)
            return h1 + t * (h2 - h1)
    return pts[0][1] if s < pts[0][0] else pts[-1][1]


@dataclass(frozen=True)
class MinTradeoff:
    """Affine entropy lower bound g(S) = intercept + slope*S with the
    crossover spot-checking statistics used by the accumulation bound."""

    slope: float
    intercept: float
    anchor: float
    gamma: float
    max_g: float
    min_g: float
    max_f: float
    min_f: float
    min_sigma_f: float
    var_f: float
    classical_bound: float | None = None

    @classmethod
    def from_line(cls, slope: float, intercept: float, anchor: float,
                  expr: BellExpression, gamma: float,
                  curve_classical_bound: float | None = None) -> "MinTradeoff":
        if slope < 0:
            raise CurveError(f"tradeoff slope must be non-negative, got {slope}")
        span = expr.abs_coeff_sum  # Bell values of any box lie in [-span, span]
        max_g = intercept + slope * span
        min_g = intercept - slope * span
        max_f = max_g
        min_sigma_f = min_g
        min_f = (1.0 - 1.0 / gamma) * max_g + (1.0 / gamma) * min_g
        var_f = (max_g - min_g) ** 2 / gamma
        cb = curve_classical_bound if curve_classical_bound is not None else classical_bound(expr)
        return cls(slope=slope, intercept=intercept, anchor=anchor, gamma=gamma,
                   max_g=max_g, min_g=min_g, max_f=max_f, min_f=min_f,
                   min_sigma_f=min_sigma_f, var_f=var_f, classical_bound=cb)

    def value(self, s: float) -> float:
        return self.intercept + self.slope * s


def _builtin(expr: BellExpression, rows, column: int, kind: str, label: str) -> EntropyCurve:
    return EntropyCurve(
        expression_name=expr.name,
        kind=kind,
        points=tuple((row[1], row[column]) for row in rows),
        classical_bound=classical_bound(expr),
        label=label,
    )


_BUILTIN_CURVES: dict[str, EntropyCurve] = {}


def _register_builtins():
    specs = [
        ("chsh", CHSH, CHSH_TABLE_ROWS),
        ("weighted", WEIGHTED, WEIGHTED_TABLE_ROWS),
    ]
    for prefix, expr, rows in specs:
        _BUILTIN_CURVES[f"{prefix}/min_entropy"] = _builtin(expr, rows, 2, MIN_ENTROPY, "npa2")
        _BUILTIN_CURVES[f"{prefix}/von_neumann_radau6"] = _builtin(expr, rows, 3, VON_NEUMANN, "radau6")
        _BUILTIN_CURVES[f"{prefix}/von_neumann"] = _builtin(expr, rows, 4, VON_NEUMANN, "radau8")
    aliases = {
        "table1": "weighted/von_neumann",
        "table2": "chsh/von_neumann",
        "eq2/min_entropy": "weighted/min_entropy",
        "eq2/von_neumann": "weighted/von_neumann",
        "eq2/von_neumann_radau6": "weighted/von_neumann_radau6",
    }
    for alias, target in aliases.items():
        _BUILTIN_CURVES[alias] = _BUILTIN_CURVES[target]


_register_builtins()


def builtin_curve_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTIN_CURVES))


def load_curve(source) -> EntropyCurve:
    """Load a curve from a built-in name, dict, or JSON file.

    Document shape: {"expression": str, "kind": "min_entropy"|"von_neumann",
    "points": [{"s": float, "h": float}, ...]}.
    """
    if isinstance(source, EntropyCurve):
        return source
    if isinstance(source, str) and source.lower() in _BUILTIN_CURVES:
        return _BUILTIN_CURVES[source.lower()]
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise CurveError(f"unknown curve or missing file: {source}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CurveError(f"malformed curve file {source}: {exc}") from exc
    elif isinstance(source, dict):
        doc = source
    else:
        raise CurveError(f"cannot load curve from {type(source).__name__}")
    try:
        name = str(doc["expression"])
        kind = str(doc["kind"])
        points = tuple((float(p["s"]), float(p["h"])) for p in doc["points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CurveError(f"malformed curve document: {exc}") from exc
    cb = doc.get("classical_bound")
    if cb is None and name.lower() in ("chsh", "weighted", "eq2"):
        from .bell import _BUILTIN_EXPRESSIONS
        cb = classical_bound(_BUILTIN_EXPRESSIONS[name.lower()])
    return EntropyCurve(expression_name=name, kind=kind, points=points,
                        classical_bound=None if cb is None else float(cb))


TSIRELSON_CHSH = 2.0 * math.sqrt(2.0)


def _h2(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def analytic_chsh_minentropy(s: float) -> float:
    """Closed-form one-party min-entropy bound 1 - log2(1 + sqrt(2 - S^2/4)).

    Zero below S=2; rejects S above the quantum maximum.  Two-party table
    bounds must dominate this.
    """
    if s > TSIRELSON_CHSH + 1e-12:
        raise CurveError(f"S={s:.6g} exceeds the CHSH quantum maximum {TSIRELSON_CHSH:.6g}")
    if s <= 2.0:
        return 0.0
    s = min(s, TSIRELSON_CHSH)
    return 1.0 - math.log2(1.0 + math.sqrt(max(0.0, 2.0 - s * s / 4.0)))


def analytic_chsh_vne(s: float) -> float:
    """Closed-form one-party von Neumann bound 1 - h2(1/2 + sqrt((S/2)^2-1)/2)."""
    if s > TSIRELSON_CHSH + 1e-12:
        raise CurveError(f"S={s:.6g} exceeds the CHSH quantum maximum {TSIRELSON_CHSH:.6g}")
    if s <= 2.0:
        return 0.0
    s = min(s, TSIRELSON_CHSH)
    return 1.0 - _h2(0.5 + math.sqrt(max(0.0, (s / 2.0) ** 2 - 1.0)) / 2.0)
