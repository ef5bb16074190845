"""Static and numeric checks of the three unconditional-purification conditions.

1. Only bi-CNOTs and local ``W (x) W`` measurements act on the pairs.
2. Swapping each local measurement for the collective parity measurement
   ``WW`` leaves what the protocol keeps, and the kept pair's state, unchanged.
3. Every collective measurement the protocol implies commutes with a dark
   Bell measurement.

Conditions 2 and 3 are checked numerically, step by step, on random dense
states of three pairs.  Pair 0 is the kept pair (the control of a bi-CNOT
group) and pair 1 is measured; pair 2 holds the purification.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import oracle
from ..errors import Unsupported
from ..rng import stream
from . import ast

DEFAULT_TRIALS = 64
TOLERANCE = 1e-10

KEEP, DROP, ALL = "keep", "drop", "all"


@dataclass
class ConditionResult:
    passed: bool
    offending: list[str] = field(default_factory=list)
    max_deviation: float | None = None
    unsupported: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "offending": self.offending,
                "max_deviation": self.max_deviation, "unsupported": self.unsupported}


@dataclass
class TheoremVerdict:
    protocol: str
    condition1: ConditionResult
    condition2: ConditionResult
    condition3: ConditionResult

    @property
    def passed(self) -> bool:
        return self.condition1.passed and self.condition2.passed and self.condition3.passed

    @property
    def failed_conditions(self) -> list[int]:
        conds = (self.condition1, self.condition2, self.condition3)
        return [n for n, c in enumerate(conds, start=1) if not c.passed]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "condition1": self.condition1.to_dict(),
            "condition2": self.condition2.to_dict(),
            "condition3": self.condition3.to_dict(),
            "pass": self.passed,
        }


def cite(step: ast.Step) -> str:
    return f"line {step.line}: {ast.format_step(step)}"


def check_condition1(spec: ast.ProtocolSpec) -> ConditionResult:
    offending = []
    for _, step in spec.walk():
        if isinstance(step, ast.DarkBell | ast.Gate):
            offending.append(cite(step))
        elif isinstance(step, ast.Measure) and step.kind != "local":
            offending.append(cite(step))
    return ConditionResult(not offending, offending)


# -- per-step context ------------------------------------------------------

@dataclass(frozen=True)
class MeasurementContext:
    step: ast.Measure
    ordinal: int
    bicnot: str | None  # basis of the bi-CNOT that fed the measured pair
    rule: ast.KeepIf | None

    def local_class(self, a: int, b: int) -> str:
        if self.step.role == "test":
            return str(a ^ b)
        if self.rule is None:
            return ALL
        bit = {None: a ^ b, "alice": a, "bob": b}[self.rule.party]
        return KEEP if bit == self.rule.value else DROP

    def parity_class(self, s: int) -> str:
        if self.step.role == "test":
            return str(s)
        if self.rule is None:
            return ALL
        if self.rule.party is not None:
            # a raw bit is not available from a parity outcome; nothing can be rejected
            return KEEP
        return KEEP if s == self.rule.value else DROP


def measurement_contexts(spec: ast.ProtocolSpec) -> list[MeasurementContext]:
    out: list[MeasurementContext] = []
    _collect(spec.steps, out)
    return out


def _collect(steps, out):
    for index, step in enumerate(steps):
        if isinstance(step, ast.Repeat):
            _collect(step.body, out)
        if not isinstance(step, ast.Measure):
            continue
        feed = rule = None
        if step.role == "destination":
            for prev in reversed(steps[:index]):
                if isinstance(prev, ast.BiCnot | ast.Gate):
                    feed = prev
                    break
            for nxt in steps[index + 1:]:
                if isinstance(nxt, ast.BiCnot | ast.Gate):
                    break
                if isinstance(nxt, ast.KeepIf):
                    rule = nxt
                    break
        if isinstance(feed, ast.Gate):
            raise Unsupported(f"{cite(step)} follows opaque gate ({cite(feed)}) the oracle cannot simulate")
        out.append(MeasurementContext(step, len(out), feed.basis if feed else None, rule))


def implied_projectors(step: ast.Measure) -> dict:
    if step.kind == "bell":
        return oracle.bell_projectors()
    wa, wb = step.bases
    if wa == wb:
        return oracle.parity_projectors(wa)
    return oracle.coarse_parity_projectors(wa, wb)


def _kept_by_class(branches, classify) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for br in branches:
        if br.state is None:
            continue
        key = classify(br.outcome)
        kept = br.probability * oracle.partial_trace(br.state, {0}).matrix
        out[key] = out.get(key, 0) + kept
    return out


def replacement_deviation(ctx: MeasurementContext, rho: oracle.DenseState) -> float:
    """Difference in the kept pair's per-decision states between local and collective measurement."""
    if ctx.bicnot is not None:
        rho = oracle.apply_bicnot(rho, 0, 1, ctx.bicnot)
    wa, wb = ctx.step.bases
    local = _kept_by_class(oracle.measure(rho, 1, oracle.local_projectors(wa, wb)),
                           lambda o: ctx.local_class(*o))
    coll = _kept_by_class(oracle.measure(rho, 1, implied_projectors(ctx.step)), ctx.parity_class)
    zero = np.zeros((4, 4))
    return max(float(np.max(np.abs(local.get(c, zero) - coll.get(c, zero)))) for c in local.keys() | coll.keys())


def _contexts_or_unsupported(spec):
    try:
        return measurement_contexts(spec), None
    except Unsupported as exc:
        return None, str(exc)


def check_condition2(spec: ast.ProtocolSpec, trials: int = DEFAULT_TRIALS, seed: int = 0) -> ConditionResult:
    contexts, problem = _contexts_or_unsupported(spec)
    if problem:
        return ConditionResult(False, unsupported=[problem])
    offending, worst = [], 0.0
    for ctx in contexts:
        if ctx.step.kind == "bell":
            continue
        rng = stream(seed, "condition2", ctx.ordinal)
        dev = max(replacement_deviation(ctx, oracle.random_mixed(3, rng)) for _ in range(trials))
        worst = max(worst, dev)
        if dev >= TOLERANCE:
            offending.append(f"{cite(ctx.step)} (deviation {dev:.3e})")
    return ConditionResult(not offending, offending, worst)


def check_condition3(spec: ast.ProtocolSpec, trials: int = DEFAULT_TRIALS, seed: int = 0) -> ConditionResult:
    contexts, problem = _contexts_or_unsupported(spec)
    if problem:
        return ConditionResult(False, unsupported=[problem])
    offending, worst = [], 0.0
    for ctx in contexts:
        rng = stream(seed, "condition3", ctx.ordinal)
        dev = oracle.commutes_with_dark_bell(implied_projectors(ctx.step), trials, rng)
        worst = max(worst, dev)
        if dev >= TOLERANCE:
            offending.append(f"{cite(ctx.step)} (deviation {dev:.3e})")
    return ConditionResult(not offending, offending, worst)


def check(spec: ast.ProtocolSpec, trials: int = DEFAULT_TRIALS, seed: int = 0) -> TheoremVerdict:
    return TheoremVerdict(
        spec.name,
        check_condition1(spec),
        check_condition2(spec, trials, seed),
        check_condition3(spec, trials, seed),
    )
