"""Command-line entry point.

Exit codes: 0 ok, 1 I/O failure, 2 bad input or config, 3 every trial
aborted, 4 unsupported protocol step, 5 verification failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, oracle, rates
from .dsl import BUNDLED, NEGATIVE, bundled_path, check, load_bundled, parse_file
from .engine import (DESK_GRID, IidBellDiagonal, SamplingBoundQuery, channel_from_config, run_protocol,
                     sampling_bound, verify_sampling_bound)
from .errors import ProtocolSyntaxError, SpecError, Unsupported
from .rng import fresh_seed, stream

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_ABORTED, EXIT_UNSUPPORTED, EXIT_FAILED = range(6)

RECURSE_SCHEMA = "purisim.recurse/1"
AGGREGATE_SCHEMA = "purisim.aggregate/1"
VERIFY_SCHEMA = "purisim.verify/1"

CONFIG_KEYS = {"protocol_file", "channel", "N", "k", "delta", "rounds", "seed", "trials", "eps0"}

# failed conditions each bundled script is expected to show
EXPECTED_FAILURES = {"protocol1": [1], "protocol2": [1], "protocol3": [], "phase_correction": [],
                     **{name: [cond] for name, cond in NEGATIVE.items()}}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- output helpers ----------------------------------------------------------

def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc.strerror or exc}") from None


def _csv(schema: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={schema}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = fresh_seed()
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _num(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"not a number: {text!r}") from None


# -- recurse -----------------------------------------------------------------

def cmd_recurse(args) -> int:
    try:
        initial = rates.check_rates(_num(t) for t in args.rates.split(","))
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid rates: {exc}") from None
    if args.schedule:
        try:
            schedule = [rates.Round(s.strip()) for s in args.schedule.split(",")]
        except ValueError:
            raise CliError(EXIT_CONFIG, "schedule entries must be 'bit' or 'phase'") from None
    elif args.target is not None:
        try:
            schedule = rates.find_schedule(initial, args.target, args.max_rounds)
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from None
        if schedule is None:
            print(f"target {args.target} not reached within {args.max_rounds} sub-steps", file=sys.stderr)
            schedule = rates.alternating(args.max_rounds)
        if not schedule:
            print("initial rates already meet the target", file=sys.stderr)
    else:
        if args.rounds < 1:
            raise CliError(EXIT_CONFIG, "--rounds must be >= 1")
        schedule = rates.alternating(2 * args.rounds)
    reports = rates.iterate(initial, schedule) if schedule else []
    if args.format == "json":
        rows = [{"round": r.round_index, "kind": r.kind.value, "rates": list(r.rates),
                 "survival": r.survival_fraction, "cumulative": r.cumulative_fraction,
                 "infidelity": r.infidelity} for r in reports]
        _write(_json({"schema": RECURSE_SCHEMA, "initial": list(initial), "rounds": rows}), args.out)
    else:
        _write(_csv(RECURSE_SCHEMA, rates.CSV_COLUMNS, rates.report_rows(reports)), args.out)
    return EXIT_OK


# -- simulate ----------------------------------------------------------------

def _positive_int(cfg: dict, key: str) -> int | None:
    if key not in cfg:
        return None
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise CliError(EXIT_CONFIG, f"config '{key}' must be a positive integer")
    return value


def load_config(path: str) -> dict:
    """Read and validate a run config; unknown keys are rejected."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise CliError(EXIT_CONFIG, f"{path}: config must be a JSON object")
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise CliError(EXIT_CONFIG, f"{path}: unknown config keys {unknown}")
    for key in ("protocol_file", "channel"):
        if key not in cfg:
            raise CliError(EXIT_CONFIG, f"{path}: missing '{key}'")
    for key in ("N", "k", "rounds", "trials"):
        _positive_int(cfg, key)
    if "seed" in cfg and (isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0):
        raise CliError(EXIT_CONFIG, "config 'seed' must be a non-negative integer")
    for key in ("delta", "eps0"):
        if key in cfg and not (isinstance(cfg[key], (int, float)) and 0.0 < cfg[key] < 1.0):
            raise CliError(EXIT_CONFIG, f"config '{key}' must lie in (0, 1)")
    if "eps0" in cfg and "delta" in cfg and not cfg["eps0"] < cfg["delta"]:
        raise CliError(EXIT_CONFIG, "config needs eps0 < delta")
    try:
        cfg["channel"] = channel_from_config(cfg["channel"])
    except (ValueError, TypeError, AttributeError) as exc:
        raise CliError(EXIT_CONFIG, f"channel: {exc}") from None
    cfg["_base"] = Path(path).resolve().parent
    return cfg


def _protocol(ref: str, base: Path):
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    if not path.exists() and ref.removesuffix(".epp") in EXPECTED_FAILURES:
        path = bundled_path(ref)
    try:
        return parse_file(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read protocol {ref}: {exc.strerror or exc}") from None
    except ProtocolSyntaxError as exc:
        raise CliError(EXIT_CONFIG, f"{path}: {exc}") from None


def trial_seed(seed: int, trial: int) -> int:
    return int(stream(seed, "trial", trial).integers(2**63))


AGGREGATE_COLUMNS = ("substep", "basis", "trials", "pairs_in_mean", "pairs_out_mean", "survival_mean",
                     "survival_se", "q_I_mean", "q_x_mean", "q_y_mean", "q_z_mean", "infidelity_mean",
                     "infidelity_se", "analytic_survival", "analytic_infidelity")


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate_rows(reports, channel) -> list[dict]:
    """Per sub-step means over accepted trials, next to the analytic recursion for iid channels."""
    accepted = [r for r in reports if r.accepted and r.rounds]
    if not accepted:
        return []
    depth = min(len(r.rounds) for r in accepted)
    analytic = None
    if isinstance(channel, IidBellDiagonal):
        kinds = [rates.Round.BIT_FLIP if s.basis == "Z" else rates.Round.PHASE_FLIP
                 for s in accepted[0].rounds[:depth]]
        analytic = rates.iterate(channel.rates, kinds)
    rows = []
    for i in range(depth):
        stats = [r.rounds[i] for r in accepted if r.rounds[i].rates is not None]
        surv, surv_se = _mean_se([s.survival_fraction for s in stats])
        inf, inf_se = _mean_se([s.rates.infidelity for s in stats])
        q = np.mean([list(s.rates) for s in stats], axis=0)
        rows.append({
            "substep": i + 1, "basis": stats[0].basis, "trials": len(stats),
            "pairs_in_mean": repr(float(np.mean([s.pairs_in for s in stats]))),
            "pairs_out_mean": repr(float(np.mean([s.pairs_out for s in stats]))),
            "survival_mean": repr(surv), "survival_se": repr(surv_se),
            "q_I_mean": repr(float(q[0])), "q_x_mean": repr(float(q[1])),
            "q_y_mean": repr(float(q[2])), "q_z_mean": repr(float(q[3])),
            "infidelity_mean": repr(inf), "infidelity_se": repr(inf_se),
            "analytic_survival": repr(analytic[i].survival_fraction) if analytic else "",
            "analytic_infidelity": repr(analytic[i].infidelity) if analytic else "",
        })
    return rows


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    spec = _protocol(cfg["protocol_file"], cfg["_base"])
    if args.seed is not None:
        seed = args.seed
    elif "seed" in cfg:
        seed = cfg["seed"]
    else:
        seed = _seed(args)
    params = {key: cfg[key] for key in ("N", "k", "delta", "rounds", "eps0") if key in cfg}
    reports = []
    try:
        for t in range(cfg.get("trials", 1)):
            reports.append(run_protocol(spec, cfg["channel"], trial_seed(seed, t), params, args.allow_collective))
    except Unsupported as exc:
        raise CliError(EXIT_UNSUPPORTED, f"{spec.name}: unsupported steps: {exc}") from None
    except (SpecError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"{spec.name}: {exc}") from None
    if args.format == "json":
        _write("".join(r.to_json() + "\n" for r in reports), args.out)
    else:
        _write(_csv(AGGREGATE_SCHEMA, AGGREGATE_COLUMNS, aggregate_rows(reports, cfg["channel"])), args.out)
    accepted = sum(r.accepted for r in reports)
    print(f"{accepted}/{len(reports)} trials accepted", file=sys.stderr)
    return EXIT_OK if accepted else EXIT_ABORTED


# -- verify ------------------------------------------------------------------

def _verify_oracle(args, seed) -> tuple[bool, dict]:
    claims = oracle.verify_commutation(args.trials, seed) + oracle.verify_trash_measurement(args.trials, seed)
    return all(c.passed for c in claims), {"claims": [c.to_dict() for c in claims]}


def _verify_theorem(args, seed) -> tuple[bool, dict]:
    entries, ok = [], True
    for name in (*BUNDLED, *NEGATIVE):
        verdict = check(load_bundled(name), args.trials, seed)
        expected = EXPECTED_FAILURES[name]
        match = verdict.failed_conditions == expected
        ok &= match
        entries.append({**verdict.to_dict(), "expected_failures": expected,
                        "failed_conditions": verdict.failed_conditions, "as_expected": match})
    return ok, {"protocols": entries}


def _verify_sampling(args, seed) -> tuple[bool, dict]:
    if args.N is not None:
        try:
            grid = (SamplingBoundQuery(args.N, args.k, args.delta, args.eps0),)
        except (TypeError, ValueError) as exc:
            raise CliError(EXIT_CONFIG, f"invalid sampling point: {exc}") from None
    else:
        grid = DESK_GRID
    trials = args.trials
    entries, ok = [], True
    for q in grid:
        try:
            entry = verify_sampling_bound(q, trials, seed).to_dict()
        except Unsupported as exc:
            entry = {"N": q.N, "k": q.k, "delta": q.delta, "eps0": q.eps0, "pass": False, "unsupported": str(exc)}
        ok &= entry["pass"]
        entries.append(entry)
    return ok, {"trials": trials, "points": entries}


_SUITES = {"oracle": (_verify_oracle, 200), "theorem": (_verify_theorem, 64), "sampling": (_verify_sampling, 10**6)}


def cmd_verify(args) -> int:
    fn, default_trials = _SUITES[args.suite]
    if args.trials is None:
        args.trials = default_trials
    if args.trials < 1:
        raise CliError(EXIT_CONFIG, "--trials must be >= 1")
    seed = _seed(args)
    ok, body = fn(args, seed)
    _write(_json({"schema": VERIFY_SCHEMA, "suite": args.suite, "seed": seed, "pass": ok, **body}), args.out)
    return EXIT_OK if ok else EXIT_FAILED


# -- bound and check -----------------------------------------------------------

def cmd_bound(args) -> int:
    try:
        query = SamplingBoundQuery(args.N, args.k, args.delta, args.eps0)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid bound query: {exc}") from None
    value = sampling_bound(query)
    if args.format == "json":
        _write(_json({"N": query.N, "k": query.k, "delta": query.delta, "eps0": query.eps0, "bound": value}),
               args.out)
    else:
        _write(f"{value:.5e}\n", args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        spec = parse_file(args.file)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.file}: {exc.strerror or exc}") from None
    except ProtocolSyntaxError as exc:
        raise CliError(EXIT_CONFIG, f"{args.file}: {exc}") from None
    verdict = check(spec, args.trials, 0 if args.seed is None else args.seed)
    _write(_json(verdict.to_dict()), args.out)
    return EXIT_OK if verdict.passed else EXIT_FAILED


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (drawn and printed to stderr when omitted)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--out", help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="purisim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recurse", parents=[common], help="iterate the Bell-diagonal recursion")
    p.add_argument("--rates", required=True, help="q_I,q_x,q_y,q_z")
    how = p.add_mutually_exclusive_group()
    how.add_argument("--rounds", type=int, default=4, help="full rounds (two sub-steps each)")
    how.add_argument("--schedule", help="comma list of 'bit' / 'phase'")
    how.add_argument("--target", type=float, help="stop once infidelity reaches this value")
    p.add_argument("--max-rounds", type=int, default=40, help="sub-step budget for --target")
    p.set_defaults(func=cmd_recurse, default_format="csv")

    p = sub.add_parser("simulate", parents=[common], help="run a protocol script on sampled pairs")
    p.add_argument("config", help="run config JSON")
    p.add_argument("--allow-collective", action="store_true",
                   help="treat collective measurements as available to the parties")
    p.set_defaults(func=cmd_simulate, default_format="json")

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=tuple(_SUITES))
    p.add_argument("--trials", type=int)
    p.add_argument("--preset", choices=("desk",), default="desk", help="sampling grid")
    for name, kind in (("--N", int), ("--k", int), ("--delta", float), ("--eps0", float)):
        p.add_argument(name, type=kind, help="single sampling point instead of the preset")
    p.set_defaults(func=cmd_verify, default_format="json")

    p = sub.add_parser("bound", parents=[common], help="evaluate the sampling tail bound")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps0", type=float, required=True)
    p.set_defaults(func=cmd_bound, default_format="csv")

    p = sub.add_parser("check", parents=[common], help="check a protocol script against the three conditions")
    p.add_argument("file")
    p.add_argument("--trials", type=int, default=64)
    p.set_defaults(func=cmd_check, default_format="json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        return args.func(args)
    except CliError as exc:
        print(f"purisim: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
