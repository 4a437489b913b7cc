"""Command-line surface.

Subcommands
-----------
rate       certified net rate for a profile (ledger + certificate breakdown)
optimize   search free protocol knobs (gamma/beta, optionally the anchor)
simulate   Monte-Carlo protocol runs; single runs can export raw bits
extract    Toeplitz-hash raw bits into near-uniform output
reproduce  emit the built-in table/figure sweeps as CSV

Profiles are JSON documents mirroring the protocol parameter fields
(see ``dirng.eat.params_from_profile``).  All rates are bits/second and
times are seconds.  CSV output uses a one-line header, '.' decimals and
no locale.  Exit codes: 0 ok, 2 usage/input error, 3 infeasible
parameters.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .bell import (BellError, CANONICAL_ANGLES, CHSH, QuantumModel, bell_value,
                   behavior_from_model, visibility_for_target)
from .curves import CurveError, load_curve
from .eat import (InfeasibleParameters, ProtocolParams, RateReport, net_rate,
                  optimize, params_from_profile)
from .extract import (DEFAULT_EPS_EXT, ExtractorError, ToeplitzSeed, extract,
                      output_length, pack_bits, unpack_bits)
from .simulate import run_protocol_for_params

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

# Sweep grids for the reproduce targets (fixed so outputs are comparable
# across runs and machines).
FIG2_TIMES = (60, 120, 240, 360, 600, 1200, 3600, 7200, 14400, 28800, 69120, 86400)
FIG34_PPASS = (0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999)
FIG34_GAMMAS = tuple(10.0 ** (-4 + (math.log10(0.3) + 4) * i / 15) for i in range(16))
TAU_GRID = (0.0, 1e-5, 3.16e-5, 1e-4, 3.16e-4, 1e-3, 3.16e-3,
            0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
FIG6_TIMES = (600, 3600, 69120)
FIG7_TIME = 360
FIG7_EPS = (1e-15, 1e-12, 1e-9, 1e-6)

CSV_COLUMNS = {
    "table1": ("events_per_second", "bell_value", "min_entropy",
               "von_neumann_radau6", "von_neumann_radau8",
               "asymptotic_rate_bits_per_s"),
    "table2": ("events_per_second", "bell_value", "min_entropy",
               "von_neumann_radau6", "von_neumann_radau8",
               "asymptotic_rate_bits_per_s"),
    "fig2": ("chunk_time_s", "net_rate_bits_per_s", "gamma", "beta"),
    "fig3": ("gamma", "p_pass", "net_rate_bits_per_s"),
    "fig4": ("gamma", "p_pass", "net_rate_bits_per_s"),
    "fig5": ("chunk_time_s", "gamma", "expansion_ratio", "net_rate_bits_per_s"),
    "fig6": ("chunk_time_s", "switch_delay_s", "net_rate_bits_per_s", "gamma", "beta"),
    "fig7": ("eps_smooth", "switch_delay_s", "net_rate_bits_per_s", "gamma"),
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_dict(report: RateReport) -> dict:
    p = report.params
    return {
        "profile": {
            "expression": p.expression.name,
            "curve": f"{p.curve.expression_name}/{p.curve.kind}",
            "expected_bell": p.expected_bell,
            "event_rate": p.event_rate,
            "chunk_time": p.chunk_time,
            "rounds": p.rounds,
            "gamma": p.gamma,
            "beta": p.beta,
            "p_pass": p.p_pass,
            "eps_smooth": p.eps_smooth,
            "switch_delay": p.switch_delay,
            "anchor": p.anchor,
        },
        "certificate": report.certificate.as_dict(),
        "ledger": report.ledger.as_dict(),
    }


def _print_report(report: RateReport, as_json: bool, out: str | None) -> None:
    if as_json:
        _emit(json.dumps(_report_dict(report), indent=2, sort_keys=True) + "\n", out)
        return
    cert = report.certificate
    led = report.ledger
    lines = [
        f"rounds               {cert.n}",
        f"tolerated bell value {_fmt(cert.s_tol)}",
        f"gamma                {_fmt(report.params.gamma)}",
        f"beta                 {_fmt(cert.beta_used)}",
        f"anchor               {_fmt(report.params.anchor)}",
        f"certified bits       {_fmt(cert.certified_bits)}",
        f"  first order        {_fmt(cert.first_order)}",
        f"  variance penalty   {_fmt(cert.variance_term)}",
        f"  kappa penalty      {_fmt(cert.kappa_term)}",
        f"  tail penalty       {_fmt(cert.tail_term)}",
        f"consumed bits        {_fmt(led.consumed_bits)}",
        f"net bits             {_fmt(led.net_bits)}",
        f"net rate             {_fmt(led.net_rate)} bits/s",
        f"expansion ratio      {_fmt(led.expansion_ratio)}",
        f"wall time            {_fmt(led.wall_time)} s",
    ]
    if cert.below_classical:
        lines.append("warning: tolerated value below the classical bound; nothing certified")
    _emit("\n".join(lines) + "\n", out)


def _load_params(args) -> ProtocolParams:
    if not args.profile:
        raise ValueError("--profile is required for this command")
    return params_from_profile(args.profile)


def cmd_rate(args) -> int:
    params = _load_params(args)
    if params.gamma is None:
        report = optimize(params)
        if math.isinf(report.certificate.s_tol):
            raise InfeasibleParameters("no feasible test-round probability for this profile")
    else:
        report = net_rate(params)
    _print_report(report, args.json, args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    params = _load_params(args)
    report = optimize(params, sweep_anchor=args.sweep_anchor)
    _print_report(report, args.json, args.out)
    return EXIT_OK


def _model_from_profile(doc: dict, params: ProtocolParams) -> QuantumModel:
    angles = tuple(float(t) for t in doc.get("angles", CANONICAL_ANGLES))
    if doc.get("visibility") is not None:
        return QuantumModel(float(doc["visibility"]), angles)
    v = visibility_for_target(params.expression, angles, params.expected_bell)
    return QuantumModel(v, angles)


def cmd_simulate(args) -> int:
    params = _load_params(args)
    doc = json.loads(Path(args.profile).read_text())
    if params.gamma is None:
        raise ValueError("simulation needs a concrete gamma in the profile")
    model = _model_from_profile(doc, params)
    n = params.n_rounds()
    if n < 1:
        raise InfeasibleParameters("no rounds fit in the chunk time")

    trials = args.trials
    if trials < 1:
        raise ValueError("--trials must be at least 1")
    results = [run_protocol_for_params(params, model, seed=args.seed, trial=t)
               for t in range(trials)]
    aborts = sum(r.aborted for r in results)
    with_data = [r for r in results if not r.no_test_data]
    mean_s_hat = (sum(r.s_hat for r in with_data) / len(with_data)
                  if with_data else math.nan)
    mean_switch = sum(r.empirical_switch_rate() for r in results) / trials

    summary = {
        "trials": trials,
        "rounds_per_trial": n,
        "abort_fraction": aborts / trials,
        "mean_bell_estimate": mean_s_hat,
        "mean_switch_rate": mean_switch,
        "threshold": results[0].threshold,
        "seed": args.seed,
        "visibility": model.visibility,
        "model_bell_value": bell_value(params.expression, behavior_from_model(model)),
    }
    if args.json:
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        for key in ("trials", "rounds_per_trial", "abort_fraction",
                    "mean_bell_estimate", "mean_switch_rate", "threshold"):
            sys.stdout.write(f"{key:20} {_fmt(summary[key])}\n")

    if args.out and trials == 1:
        res = results[0]
        Path(args.out).write_bytes(res.raw_bits)
        sidecar = {
            "bit_count": res.raw_bitlen,
            "rounds": res.n,
            "test_rounds": res.m_test,
            "bell_estimate": None if math.isnan(res.s_hat) else res.s_hat,
            "threshold": res.threshold,
            "aborted": res.aborted,
            "switches": res.switches,
            "seed": res.seed,
            "trial": res.trial,
            "counts": res.counts.tolist(),
        }
        Path(args.out + ".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    elif args.out and trials != 1:
        sys.stderr.write("note: raw bits are only written for a single trial\n")
    return EXIT_OK


def _certified_bits(args) -> float:
    if args.certified_bits is not None:
        return float(args.certified_bits)
    if not args.certificate:
        raise ValueError("need --certificate or --certified-bits")
    doc = json.loads(Path(args.certificate).read_text())
    for probe in (doc, doc.get("certificate", {})):
        if isinstance(probe, dict) and "certified_bits" in probe:
            return float(probe["certified_bits"])
    raise ValueError(f"no certified_bits field found in {args.certificate}")


def _raw_bit_count(path: str) -> int:
    sidecar = Path(path + ".json")
    if sidecar.exists():
        return int(json.loads(sidecar.read_text())["bit_count"])
    return 8 * Path(path).stat().st_size


def cmd_extract(args) -> int:
    n_in = _raw_bit_count(args.raw)
    if n_in < 1:
        raise ExtractorError("raw input holds no bits")
    certified = _certified_bits(args)
    m_out = output_length(certified, args.eps_ext)
    seed_len = n_in + m_out - 1 if m_out > 0 else 0

    if args.make_seed:
        if args.out is None:
            raise ValueError("--make-seed needs --out for the seed file")
        seed = ToeplitzSeed.generate(n_in, m_out, args.seed)
        Path(args.out).write_bytes(pack_bits(seed.bits))
        sys.stdout.write(f"n_in={n_in} m_out={m_out} seed_bits={seed_len}\n")
        return EXIT_OK

    if not args.seed_file:
        raise ValueError("need --seed-file (or --make-seed to create one)")
    data = Path(args.seed_file).read_bytes()
    if len(data) != (seed_len + 7) // 8:
        raise ExtractorError(
            f"seed file holds {len(data)} bytes, need {(seed_len + 7) // 8} "
            f"for n_in={n_in}, m_out={m_out}")
    seed = ToeplitzSeed(unpack_bits(data, seed_len), n_in, m_out)

    raw = unpack_bits(Path(args.raw).read_bytes(), n_in)
    out_bits = extract(raw, seed)
    if args.out is None:
        raise ValueError("--out is required to write the extracted bits")
    Path(args.out).write_bytes(pack_bits(out_bits))
    total_eps = args.eps_ext + (args.eps_smooth or 0.0)
    sys.stdout.write(f"n_in={n_in} m_out={m_out} eps_ext={_fmt(args.eps_ext)} "
                     f"total_failure={_fmt(total_eps)}\n")
    if m_out == 0:
        sys.stderr.write("warning: certificate admits no output bits\n")
    return EXIT_OK


#: Parameter-vector fields a sweep may vary.
SWEEPABLE = ("chunk_time", "gamma", "p_pass", "switch_delay", "eps_smooth",
             "event_rate")


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional parameter sweep: vary one knob over a grid, keep
    the rest of the vector fixed (free gamma/beta are optimized per
    point)."""

    variable: str
    grid: tuple[float, ...]
    fixed: ProtocolParams

    def __post_init__(self):
        if self.variable not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.variable!r}; "
                             f"choose one of {SWEEPABLE}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)


def run_sweep(spec: SweepSpec) -> list[tuple[float, RateReport | None]]:
    """Evaluate the sweep in grid order; infeasible points yield None."""
    rows = []
    for value in spec.grid:
        params = replace(spec.fixed, **{spec.variable: value})
        try:
            report = optimize(params) if params.gamma is None else net_rate(params)
        except InfeasibleParameters:
            report = None
        rows.append((value, report))
    return rows


def _desk_params(chunk_time: float, eps_smooth: float = 1e-15,
                 switch_delay: float = 0.0, gamma: float | None = None,
                 p_pass: float = 0.9999) -> ProtocolParams:
    return ProtocolParams(
        expression=CHSH,
        curve=load_curve("table2"),
        expected_bell=2.65022,
        event_rate=70000.0,
        chunk_time=chunk_time,
        gamma=gamma,
        p_pass=p_pass,
        eps_smooth=eps_smooth,
        switch_delay=switch_delay,
    )


def _table_rows(name: str) -> list[tuple]:
    from .curves import CHSH_TABLE_ROWS, WEIGHTED_TABLE_ROWS
    rows = WEIGHTED_TABLE_ROWS if name == "table1" else CHSH_TABLE_ROWS
    curve = load_curve(name)
    return [(events, s, hmin, vne6, vne8, events * curve.value_at(s))
            for events, s, hmin, vne6, vne8 in rows]


def _fig2_rows() -> list[tuple]:
    spec = SweepSpec("chunk_time", FIG2_TIMES, _desk_params(600.0))
    return [(t, rep.ledger.net_rate, rep.params.gamma, rep.params.beta)
            for t, rep in run_sweep(spec)]


def _fig34_rows(chunk_time: float) -> list[tuple]:
    rows = []
    for gamma in FIG34_GAMMAS:
        spec = SweepSpec("p_pass", FIG34_PPASS,
                         _desk_params(chunk_time, gamma=gamma))
        for p_pass, rep in run_sweep(spec):
            rate = math.nan if rep is None else rep.ledger.net_rate
            rows.append((gamma, p_pass, rate))
    return rows


def _fig5_rows() -> list[tuple]:
    rows = []
    for t in (600.0, 3600.0):
        spec = SweepSpec("gamma", FIG34_GAMMAS, _desk_params(t))
        for gamma, rep in run_sweep(spec):
            if rep is None:
                rows.append((t, gamma, math.nan, math.nan))
            else:
                rows.append((t, gamma, rep.ledger.expansion_ratio,
                             rep.ledger.net_rate))
    return rows


def _fig6_rows() -> list[tuple]:
    rows = []
    for t in FIG6_TIMES:
        spec = SweepSpec("switch_delay", TAU_GRID, _desk_params(float(t)))
        for tau, rep in run_sweep(spec):
            rows.append((float(t), tau, rep.ledger.net_rate,
                         rep.params.gamma, rep.params.beta))
    return rows


def _fig7_rows() -> list[tuple]:
    rows = []
    for eps in FIG7_EPS:
        spec = SweepSpec("switch_delay", TAU_GRID,
                         _desk_params(float(FIG7_TIME), eps_smooth=eps))
        for tau, rep in run_sweep(spec):
            rows.append((eps, tau, rep.ledger.net_rate, rep.params.gamma))
    return rows


_REPRODUCE_BUILDERS = {
    "table1": lambda: _table_rows("table1"),
    "table2": lambda: _table_rows("table2"),
    "fig2": _fig2_rows,
    "fig3": lambda: _fig34_rows(600.0),
    "fig4": lambda: _fig34_rows(3600.0),
    "fig5": _fig5_rows,
    "fig6": _fig6_rows,
    "fig7": _fig7_rows,
}


def cmd_reproduce(args) -> int:
    builder = _REPRODUCE_BUILDERS.get(args.target)
    if builder is None:
        sys.stderr.write(f"unknown target {args.target}\n")
        return EXIT_INPUT
    rows = builder()
    cols = CSV_COLUMNS[args.target]
    if args.json:
        doc = [dict(zip(cols, row)) for row in rows]
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        body = "\n".join(",".join(_fmt(v) for v in row) for row in rows)
        _emit(",".join(cols) + "\n" + body + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", help="JSON protocol profile")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=0,
                        help="64-bit seed for anything pseudo-random")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="write the main output to this file")

    parser = argparse.ArgumentParser(
        prog="dirng",
        description="Certified-rate engine and simulator for Bell-test "
                    "randomness expansion",
        epilog="CSV headers per reproduce target: "
               + "; ".join(f"{k}: {','.join(v)}" for k, v in CSV_COLUMNS.items()),
    )
    parser.add_argument("--version", action="version", version=f"dirng {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common],
                       help="certified net rate for a profile")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("optimize", parents=[common],
                       help="optimize free knobs (gamma/beta, optionally anchor)")
    p.add_argument("--sweep-anchor", action="store_true",
                   help="also sweep the tradeoff anchor over curve vertices")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", parents=[common],
                       help="Monte-Carlo protocol runs")
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", parents=[common],
                       help="Toeplitz-extract raw bits")
    p.add_argument("--raw", required=True, help="packed raw-bit file")
    p.add_argument("--seed-file", help="packed Toeplitz seed bits")
    p.add_argument("--certificate", help="JSON holding certified_bits")
    p.add_argument("--certified-bits", type=float, default=None)
    p.add_argument("--eps-ext", type=float, default=DEFAULT_EPS_EXT)
    p.add_argument("--eps-smooth", type=float, default=None,
                   help="smoothing parameter, only for the failure-budget report")
    p.add_argument("--make-seed", action="store_true",
                   help="generate the seed file instead of extracting")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reproduce", parents=[common],
                       help="emit built-in table/figure sweeps as CSV")
    p.add_argument("--target", required=True,
                   choices=["table1", "table2", "fig2", "fig3", "fig4",
                            "fig5", "fig6", "fig7"])
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleParameters as exc:
        sys.stderr.write(f"infeasible parameters: {exc}\n")
        return EXIT_INFEASIBLE
    except (BellError, CurveError, ExtractorError, ValueError, OSError,
            KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
