"""Typed AST for ``.epp`` protocol scripts.

Counts are either integer literals or the name of a ``PARAM``.  Source line
numbers ride along for diagnostics but are excluded from equality, so a
parse / pretty-print round trip compares equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union

Count = Union[int, str]

ROLES = ("destination", "test", "trash")
GROUPINGS = ("random", "fixed")
PARTIES = ("alice", "bob")


@dataclass(frozen=True)
class Distribute:
    count: Count
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DarkBell:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TestSample:
    basis: str
    count: Count
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BiCnot:
    basis: str
    grouping: str = "random"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Measure:
    """``kind`` is ``local``, ``collective`` or ``bell`` (a read-out Bell measurement).

    A local measurement may name a second basis for Bob's side.
    """

    kind: str
    basis: str | None = None
    role: str | None = None
    basis_b: str | None = None

    line: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.basis_b is not None and self.basis_b == self.basis:
            object.__setattr__(self, "basis_b", None)

    @property
    def bases(self) -> tuple[str, str]:
        return self.basis, self.basis_b or self.basis


@dataclass(frozen=True)
class KeepIf:
    """Keep the control of each group when the announced bit equals ``value``.

    With ``party`` unset the bit is the parity of both sides; otherwise it is
    that party's raw outcome.
    """

    value: int
    party: str | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Discard:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Key:
    basis: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Gate:
    name: str
    arity: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Repeat:
    count: Count
    body: tuple["Step", ...]
    line: int = field(default=0, compare=False)


Step = Union[Distribute, DarkBell, TestSample, BiCnot, Measure, KeepIf, Discard, Key, Gate, Repeat]


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    steps: tuple[Step, ...]
    parameters: dict[str, int | float] = field(default_factory=dict)

    def walk(self):
        """Yield ``(block_path, step)`` depth-first; REPEAT bodies are visited once."""
        yield from _walk(self.steps, ())

    def resolve(self, count: Count, overrides: dict | None = None) -> int:
        params = {**self.parameters, **(overrides or {})}
        value = params[count] if isinstance(count, str) else count
        if int(value) != value or value < 0:
            raise ValueError(f"count {count!r} must be a non-negative integer, got {value!r}")
        return int(value)


def _walk(steps, path):
    for index, step in enumerate(steps):
        yield path + (index,), step
        if isinstance(step, Repeat):
            yield from _walk(step.body, path + (index,))


def phase_of(step: Step) -> str:
    if isinstance(step, (Distribute, DarkBell)):
        return "distribution"
    if isinstance(step, TestSample) or (isinstance(step, Measure) and step.role == "test"):
        return "test"
    if isinstance(step, (Repeat, BiCnot, KeepIf)) or (isinstance(step, Measure) and step.role == "destination"):
        return "rejection"
    return "finish"


def phases(spec: ProtocolSpec) -> list[tuple[str, list[Step]]]:
    """Consecutive top-level steps grouped by protocol phase."""
    return [(name, list(group)) for name, group in itertools.groupby(spec.steps, key=phase_of)]


def format_count(count: Count) -> str:
    return str(count)


def pretty_print(spec: ProtocolSpec) -> str:
    lines = [f"PROTOCOL {spec.name}"]
    for name, value in spec.parameters.items():
        lines.append(f"PARAM {name} = {value!r}")
    _emit(spec.steps, lines, 0)
    return "\n".join(lines) + "\n"


def format_step(step: Step) -> str:
    if isinstance(step, Distribute):
        return f"DISTRIBUTE {step.count}"
    if isinstance(step, DarkBell):
        return "DARKBELL"
    if isinstance(step, TestSample):
        return f"TEST {step.basis} {step.count}"
    if isinstance(step, BiCnot):
        return f"BICNOT {step.basis} {step.grouping}"
    if isinstance(step, Measure):
        if step.kind == "bell":
            return "MEASURE BELL READ"
        bases = step.basis if step.basis_b is None else f"{step.basis} {step.basis_b}"
        return f"MEASURE {step.kind.upper()} {bases} ON {step.role}"
    if isinstance(step, KeepIf):
        return f"KEEPIF {step.value}" if step.party is None else f"KEEPIF {step.party.upper()} {step.value}"
    if isinstance(step, Discard):
        return "DISCARD"
    if isinstance(step, Key):
        return f"KEY {step.basis}"
    if isinstance(step, Gate):
        return f"GATE {step.name} {step.arity}"
    if isinstance(step, Repeat):
        return f"REPEAT {step.count} {{ ... }}"
    raise TypeError(f"not a protocol step: {step!r}")


def _emit(steps, lines, depth):
    pad = "  " * depth
    for step in steps:
        if isinstance(step, Repeat):
            lines.append(f"{pad}REPEAT {step.count} {{")
            _emit(step.body, lines, depth + 1)
            lines.append(f"{pad}}}")
        else:
            lines.append(pad + format_step(step))
