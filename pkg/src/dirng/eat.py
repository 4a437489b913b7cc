"""Finite-size certified-rate engine.

Given a protocol parameter vector, an entropy curve and a Bell
expression, this module computes how many extractable bits a chunk
certifies after finite-statistics corrections, how much randomness the
spot-checking consumes, and the resulting net rate; it also optimizes
the free protocol knobs (test-round probability gamma, the Renyi-order
parameter beta, optionally the tradeoff anchor).

The certified-output bound for n rounds with affine tradeoff g and
tolerated Bell value S_tol is

    max(0,  n*g(S_tol)
          - n * beta*(ln2/2) * V^2
          - n * beta^2 * K(beta)
          - (g_eps(eps_smooth) + (1+beta)*log2(1/p_pass)) / beta)

with d = 4 output symbols per round (two bits),

    V        = log2(2*d^2 + 1) + sqrt(2 + Var_f),
    g_eps(e) = -log2(1 - sqrt(1 - e^2)),
    K(beta)  = 2^(beta*(2*log2(d) + Max_f - MinSigma_f))
               * ln^3(2^(2*log2(d) + Max_f - MinSigma_f) + e^2)
               / (6 * (1-beta)^3 * ln 2),

and the spot-checking statistics taken from the tradeoff.  The tolerated
value is S_exp - delta with delta from a one-sided Hoeffding bound on the
per-test-round estimator 4*c_xy*(-1)^(a xor b) (range 8*max|c_xy|).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .bell import BellExpression, expression_from_json
from .curves import EntropyCurve, MinTradeoff, load_curve

LN2 = math.log(2.0)
OUTPUT_DIM = 4                      # two binary outcomes per round
LOG2_V_CONST = math.log2(2.0 * OUTPUT_DIM**2 + 1.0)   # log2(33)
TWO_LOG2_D = 2.0 * math.log2(OUTPUT_DIM)              # 4 bits

#: Optimizer search domains (gamma grid is logarithmic).
GAMMA_RANGE = (1e-5, 0.3)
GAMMA_GRID_POINTS = 80
BETA_RANGE = (1e-6, 1.0 - 1e-6)
BETA_ABS_TOL = 1e-6


class InfeasibleParameters(ValueError):
    """Parameter vector cannot run (no rounds, no test rounds, ...)."""


@dataclass(frozen=True)
class ProtocolParams:
    """Full protocol parameter vector.

    Exactly one of ``chunk_time`` (seconds) or ``rounds`` must be set; a
    missing ``gamma``/``beta`` marks that knob as free for the optimizer.
    """

    expression: BellExpression
    curve: EntropyCurve
    expected_bell: float
    event_rate: float
    chunk_time: float | None = None
    rounds: int | None = None
    gamma: float | None = None
    beta: float | None = None
    p_pass: float = 0.9999
    eps_smooth: float = 1e-15
    switch_delay: float = 0.0
    h_settings_x: float = 1.0
    h_settings_y: float = 1.0
    gen_settings: tuple[int, int] = (0, 0)
    anchor: float | None = None

    def __post_init__(self):
        if self.event_rate <= 0:
            raise InfeasibleParameters(f"event rate must be positive, got {self.event_rate}")
        if (self.chunk_time is None) == (self.rounds is None):
            raise InfeasibleParameters("set exactly one of chunk_time or rounds")
        if self.chunk_time is not None and self.chunk_time <= 0:
            raise InfeasibleParameters("chunk_time must be positive")
        if self.rounds is not None and self.rounds < 1:
            raise InfeasibleParameters("rounds must be at least 1")
        if self.switch_delay < 0:
            raise InfeasibleParameters("switch delay cannot be negative")
        if not 0.0 < self.p_pass < 1.0:
            raise InfeasibleParameters("p_pass must be in (0, 1)")
        if not 0.0 < self.eps_smooth < 1.0:
            raise InfeasibleParameters("eps_smooth must be in (0, 1)")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise InfeasibleParameters("gamma must be in (0, 1)")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise InfeasibleParameters("beta must be in (0, 1)")
        if self.gen_settings not in ((0, 0), (0, 1), (1, 0), (1, 1)):
            raise InfeasibleParameters("gen_settings must be a pair of bits")

    @property
    def h_settings(self) -> float:
        return self.h_settings_x + self.h_settings_y

    def n_rounds(self, gamma: float | None = None) -> int:
        if self.rounds is not None:
            return self.rounds
        g = self.gamma if gamma is None else gamma
        if g is None:
            raise InfeasibleParameters("gamma needed to derive the round count from time")
        return rounds_in_time(self.chunk_time, self.event_rate, self.switch_delay, g)

    def wall_time(self, n: int, gamma: float) -> float:
        if self.chunk_time is not None:
            return self.chunk_time
        return n * (1.0 / self.event_rate + self.switch_delay * switch_probability(gamma))


@dataclass(frozen=True)
class EatCertificate:
    """Certified output length with its per-term breakdown (bits)."""

    n: int
    s_tol: float
    beta_used: float
    certified_bits: float
    first_order: float
    variance_term: float
    kappa_term: float
    tail_term: float
    clipped: bool = False
    below_classical: bool = False

    def breakdown_sum(self) -> float:
        return self.first_order - self.variance_term - self.kappa_term - self.tail_term

    def as_dict(self) -> dict:
        return {
            "rounds": self.n,
            "tolerated_bell": self.s_tol,
            "beta": self.beta_used,
            "certified_bits": self.certified_bits,
            "first_order_bits": self.first_order,
            "variance_term_bits": self.variance_term,
            "kappa_term_bits": self.kappa_term,
            "tail_term_bits": self.tail_term,
            "clipped": self.clipped,
            "below_classical_bound": self.below_classical,
        }


@dataclass(frozen=True)
class AccountingLedger:
    """Consumed vs generated randomness for one chunk."""

    consumed_bits: float
    generated_raw_bits: float
    net_bits: float
    wall_time: float

    @property
    def expansion_ratio(self) -> float | None:
        if self.consumed_bits <= 0:
            return None
        return self.net_bits / self.consumed_bits

    @property
    def net_rate(self) -> float:
        return self.net_bits / self.wall_time

    def as_dict(self) -> dict:
        return {
            "consumed_bits": self.consumed_bits,
            "generated_raw_bits": self.generated_raw_bits,
            "net_bits": self.net_bits,
            "net_rate_bits_per_s": self.net_rate,
            "expansion_ratio": self.expansion_ratio,
            "wall_time_s": self.wall_time,
        }


@dataclass(frozen=True)
class RateReport:
    params: ProtocolParams
    certificate: EatCertificate
    ledger: AccountingLedger
    tradeoff: MinTradeoff


def binary_entropy(g: float) -> float:
    """H2 in bits with the 0*log(0) = 0 convention."""
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"binary entropy needs an argument in [0, 1], got {g}")
    if g in (0.0, 1.0):
        return 0.0
    return -g * math.log2(g) - (1.0 - g) * math.log2(1.0 - g)


def consumption_per_round(gamma: float, h_settings: float = 2.0) -> float:
    """Average public randomness spent per round: settings + round-type choice."""
    return h_settings * gamma + binary_entropy(gamma)


def switch_probability(gamma: float) -> float:
    """Probability that consecutive rounds use different joint settings.

    Settings are i.i.d. per round: the generation pair occurs with
    probability (1-gamma) + gamma/4, each other pair with gamma/4.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    p_gen = (1.0 - gamma) + gamma / 4.0
    return 1.0 - (p_gen**2 + 3.0 * (gamma / 4.0) ** 2)


def rounds_in_time(chunk_time: float, event_rate: float,
                   switch_delay: float, gamma: float) -> int:
    """Rounds that fit in the chunk once switch delays are paid."""
    if chunk_time <= 0 or event_rate <= 0:
        raise InfeasibleParameters("chunk_time and event_rate must be positive")
    per_round = 1.0 / event_rate + switch_delay * switch_probability(gamma)
    return int(chunk_time / per_round)


def bell_tolerance(expr: BellExpression, gamma: float, n: int, p_pass: float) -> float:
    """One-sided Hoeffding deviation for the Bell estimate over m = gamma*n
    expected test rounds; honest devices then clear S_exp - delta with
    probability at least p_pass."""
    m = gamma * n
    if m < 1.0:
        raise InfeasibleParameters(
            f"expected test rounds gamma*n = {m:.3g} < 1; cannot estimate the Bell value")
    if not 0.0 < p_pass < 1.0:
        raise InfeasibleParameters("p_pass must be in (0, 1)")
    score_range = 8.0 * expr.max_abs_coeff
    return score_range * math.sqrt(math.log(1.0 / (1.0 - p_pass)) / (2.0 * m))


def smoothing_penalty(eps: float) -> float:
    """g_eps(e) = -log2(1 - sqrt(1 - e^2)), evaluated stably for tiny e."""
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    # 1 - sqrt(1-e^2) = e^2 / (1 + sqrt(1-e^2)) avoids catastrophic cancellation
    return -(2.0 * math.log2(eps) - math.log2(1.0 + math.sqrt(max(0.0, 1.0 - eps * eps))))


def _second_order_terms(tradeoff: MinTradeoff, beta: float, n: int,
                        eps_smooth: float, p_pass: float) -> tuple[float, float, float]:
    var_coeff = LOG2_V_CONST + math.sqrt(2.0 + tradeoff.var_f)
    variance_term = n * beta * (LN2 / 2.0) * var_coeff**2
    spread = TWO_LOG2_D + tradeoff.max_f - tradeoff.min_sigma_f
    kappa = (2.0 ** (beta * spread) * math.log(2.0**spread + math.e**2) ** 3
             / (6.0 * (1.0 - beta) ** 3 * LN2))
    kappa_term = n * beta * beta * kappa
    tail_term = (smoothing_penalty(eps_smooth)
                 + (1.0 + beta) * math.log2(1.0 / p_pass)) / beta
    return variance_term, kappa_term, tail_term


def eat_certified_bits(tradeoff: MinTradeoff, n: int, s_tol: float, beta: float,
                       eps_smooth: float, p_pass: float) -> EatCertificate:
    """Certified extractable bits for n rounds at tolerated Bell value s_tol."""
    if not 0.0 < beta < 1.0:
        raise InfeasibleParameters(f"beta must be in (0, 1), got {beta}")
    if n < 1:
        raise InfeasibleParameters("need at least one round")
    below = tradeoff.classical_bound is not None and s_tol < tradeoff.classical_bound
    if below:
        return EatCertificate(n=n, s_tol=s_tol, beta_used=beta, certified_bits=0.0,
                              first_order=0.0, variance_term=0.0, kappa_term=0.0,
                              tail_term=0.0, clipped=True, below_classical=True)
    first_order = n * tradeoff.value(s_tol)
    variance_term, kappa_term, tail_term = _second_order_terms(
        tradeoff, beta, n, eps_smooth, p_pass)
    raw = first_order - variance_term - kappa_term - tail_term
    return EatCertificate(n=n, s_tol=s_tol, beta_used=beta,
                          certified_bits=max(0.0, raw),
                          first_order=first_order, variance_term=variance_term,
                          kappa_term=kappa_term, tail_term=tail_term,
                          clipped=raw < 0.0)


def _golden_min(f, lo: float, hi: float, abs_tol: float) -> float:
    """Golden-section minimum of a unimodal f on [lo, hi] (log-spaced probes,
    stopping once the bracket is narrower than abs_tol in linear space)."""
    llo, lhi = math.log(lo), math.log(hi)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = lhi - invphi * (lhi - llo)
    d = llo + invphi * (lhi - llo)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while math.exp(lhi) - math.exp(llo) > abs_tol:
        if fc < fd:
            lhi, d, fd = d, c, fc
            c = lhi - invphi * (lhi - llo)
            fc = f(math.exp(c))
        else:
            llo, c, fc = c, d, fd
            d = llo + invphi * (lhi - llo)
            fd = f(math.exp(d))
    return math.exp(0.5 * (llo + lhi))


def optimal_beta(tradeoff: MinTradeoff, n: int, eps_smooth: float, p_pass: float,
                 bounds: tuple[float, float] = BETA_RANGE) -> float:
    """beta minimizing the total finite-size penalty (independent of the
    tradeoff's value at the tolerated point, so usable even when the raw
    certificate would clip to zero)."""

    def penalty(beta: float) -> float:
        v, k, t = _second_order_terms(tradeoff, beta, n, eps_smooth, p_pass)
        return v + k + t

    return _golden_min(penalty, bounds[0], bounds[1], BETA_ABS_TOL)


def _evaluate(params: ProtocolParams, gamma: float, beta: float | None,
              anchor: float, beta_bounds: tuple[float, float]) -> RateReport | None:
    """One rate evaluation; None when (gamma, n) cannot run at all."""
    n = params.n_rounds(gamma)
    if n < 1 or gamma * n < 1.0:
        return None
    tradeoff = params.curve.tangent_at(anchor, params.expression, gamma)
    delta = bell_tolerance(params.expression, gamma, n, params.p_pass)
    s_tol = params.expected_bell - delta
    if beta is None:
        beta = optimal_beta(tradeoff, n, params.eps_smooth, params.p_pass, beta_bounds)
    cert = eat_certified_bits(tradeoff, n, s_tol, beta, params.eps_smooth, params.p_pass)
    consumed = n * consumption_per_round(gamma, params.h_settings)
    net = cert.certified_bits - consumed
    ledger = AccountingLedger(consumed_bits=consumed,
                              generated_raw_bits=cert.certified_bits,
                              net_bits=net,
                              wall_time=params.wall_time(n, gamma))
    resolved = replace(params, gamma=gamma, beta=beta, anchor=anchor)
    return RateReport(params=resolved, certificate=cert, ledger=ledger, tradeoff=tradeoff)


def net_rate(params: ProtocolParams,
             beta_bounds: tuple[float, float] = BETA_RANGE) -> RateReport:
    """Certified net rate for a concrete parameter vector.

    gamma must be fixed; a missing beta is chosen by minimizing the
    finite-size penalty; a missing anchor falls back to the curve's
    conservative default.
    """
    if params.gamma is None:
        raise InfeasibleParameters("net_rate needs a concrete gamma (use optimize)")
    anchor = params.anchor if params.anchor is not None else params.curve.default_anchor()
    report = _evaluate(params, params.gamma, params.beta, anchor, beta_bounds)
    if report is None:
        raise InfeasibleParameters(
            f"no protocol rounds fit (gamma={params.gamma}, n={params.n_rounds(params.gamma)})")
    return report


def _gamma_grid(n_points: int = GAMMA_GRID_POINTS) -> list[float]:
    lo, hi = math.log10(GAMMA_RANGE[0]), math.log10(GAMMA_RANGE[1])
    return [10.0 ** (lo + (hi - lo) * i / (n_points - 1)) for i in range(n_points)]


def optimize(params: ProtocolParams, sweep_anchor: bool = False,
             beta_bounds: tuple[float, float] = BETA_RANGE,
             gamma_points: int = GAMMA_GRID_POINTS) -> RateReport:
    """Coordinate search over the free knobs, maximizing the net rate.

    gamma runs over a logarithmic grid (with a golden-section refinement
    around the best grid point) when free; beta is optimized per point
    when free; with ``sweep_anchor`` the tradeoff anchor additionally
    sweeps the curve's envelope vertices.  Deterministic: ties keep the
    smallest gamma, then the smallest beta.  If no grid point is feasible
    a zero-rate certificate is returned at the most conservative corner.
    """
    free_gamma = params.gamma is None
    free_beta = params.beta is None
    if not (free_gamma or free_beta or sweep_anchor):
        raise ValueError("optimize needs at least one free variable")

    if sweep_anchor:
        anchors = [s for s, _ in params.curve.envelope_vertices]
    elif params.anchor is not None:
        anchors = [params.anchor]
    else:
        anchors = [params.curve.default_anchor()]
    gammas = _gamma_grid(gamma_points) if free_gamma else [params.gamma]

    best: RateReport | None = None

    def consider(report: RateReport | None) -> None:
        nonlocal best
        if report is None:
            return
        if best is None or report.ledger.net_rate > best.ledger.net_rate:
            best = report

    for anchor in anchors:
        for gamma in gammas:
            consider(_evaluate(params, gamma, params.beta, anchor, beta_bounds))
        if free_gamma and best is not None and best.params.anchor == anchor:
            # refine gamma between the best grid point's neighbors
            idx = min(range(len(gammas)),
                      key=lambda i: abs(gammas[i] - best.params.gamma))
            lo = gammas[max(0, idx - 1)]
            hi = gammas[min(len(gammas) - 1, idx + 1)]
            if hi > lo:
                def neg_rate(g):
                    rep = _evaluate(params, g, params.beta, anchor, beta_bounds)
                    return math.inf if rep is None else -rep.ledger.net_rate

                g_star = _golden_min(neg_rate, lo, hi, 1e-7)
                consider(_evaluate(params, g_star, params.beta, anchor, beta_bounds))

    if best is None:
        # nothing feasible: report a zero certificate at the grid corner
        gamma = gammas[0]
        n = max(1, params.n_rounds(gamma))
        cert = EatCertificate(n=n, s_tol=-math.inf, beta_used=beta_bounds[0],
                              certified_bits=0.0, first_order=0.0, variance_term=0.0,
                              kappa_term=0.0, tail_term=0.0, clipped=True)
        consumed = n * consumption_per_round(gamma, params.h_settings)
        ledger = AccountingLedger(consumed_bits=consumed, generated_raw_bits=0.0,
                                  net_bits=-consumed,
                                  wall_time=params.wall_time(n, gamma))
        anchor = anchors[0]
        tradeoff = params.curve.tangent_at(anchor, params.expression, gamma)
        return RateReport(params=replace(params, gamma=gamma, beta=beta_bounds[0],
                                         anchor=anchor),
                          certificate=cert, ledger=ledger, tradeoff=tradeoff)
    return best


def asymptotic_rate(event_rate: float, curve: EntropyCurve, s: float) -> float:
    """Events per second times the certified entropy per round, ignoring
    finite-size corrections."""
    if event_rate < 0:
        raise ValueError("event rate cannot be negative")
    return event_rate * curve.value_at(s)


def params_from_profile(source) -> ProtocolParams:
    """Build a parameter vector from a profile document (dict or JSON file).

    Recognized keys: expression, curve, expected_bell, event_rate,
    chunk_time | rounds, gamma, beta (numbers or "optimize"), p_pass,
    eps_smooth, switch_delay, h_settings_x, h_settings_y, gen_settings,
    anchor, plus the simulation-only keys visibility and angles (ignored
    here).
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"profile file not found: {source}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed profile {source}: {exc}") from exc
    elif isinstance(source, dict):
        doc = dict(source)
    else:
        raise TypeError(f"cannot load profile from {type(source).__name__}")

    def knob(key):
        v = doc.get(key)
        if v is None or (isinstance(v, str) and v.lower() == "optimize"):
            return None
        return float(v)

    try:
        expr = expression_from_json(doc.get("expression", "chsh"))
        curve = load_curve(doc.get("curve", "table2"))
        kwargs = dict(
            expression=expr,
            curve=curve,
            expected_bell=float(doc["expected_bell"]),
            event_rate=float(doc["event_rate"]),
            gamma=knob("gamma"),
            beta=knob("beta"),
            anchor=knob("anchor"),
        )
    except KeyError as exc:
        raise ValueError(f"profile missing required key: {exc}") from exc
    if "chunk_time" in doc and doc["chunk_time"] is not None:
        kwargs["chunk_time"] = float(doc["chunk_time"])
    if "rounds" in doc and doc["rounds"] is not None:
        kwargs["rounds"] = int(doc["rounds"])
    for key in ("p_pass", "eps_smooth", "switch_delay", "h_settings_x", "h_settings_y"):
        if key in doc and doc[key] is not None:
            kwargs[key] = float(doc[key])
    if "gen_settings" in doc and doc["gen_settings"] is not None:
        kwargs["gen_settings"] = tuple(int(v) for v in doc["gen_settings"])
    return ProtocolParams(**kwargs)
