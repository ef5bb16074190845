"""Analytic Bell-diagonal rate recursion for two-pair error rejection.

A bit-flip round groups pairs two by two, collects the Z parity on the
destination with a Z-basis bi-CNOT and keeps the control only when that
parity is 0.  On an i.i.d. Bell-diagonal ensemble with rates
``(q_I, q_x, q_y, q_z)`` the surviving controls have rates::

    D    = (q_I + q_z)**2 + (q_x + q_y)**2
    q_I' = (q_I**2 + q_z**2) / D      q_x' = (q_x**2 + q_y**2) / D
    q_y' = 2 q_x q_y / D              q_z' = 2 q_I q_z / D

and a fraction ``D / 2`` of the input pairs survives (a group passes with
probability ``D`` and gives up its destination).  The phase-flip round is
the same map with ``q_x`` and ``q_z`` exchanged.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

NORM_TOL = 1e-12


class RateVector(NamedTuple):
    q_I: float
    q_x: float
    q_y: float
    q_z: float

    @property
    def infidelity(self) -> float:
        return self.q_x + self.q_y + self.q_z

    def swap_xz(self) -> "RateVector":
        return RateVector(self.q_I, self.q_z, self.q_y, self.q_x)


def check_rates(rates: Iterable[float], tol: float = NORM_TOL) -> RateVector:
    """Validate and return ``rates`` as a RateVector; raise ValueError otherwise."""
    values = tuple(float(v) for v in rates)
    if len(values) != 4:
        raise ValueError(f"expected 4 rates, got {len(values)}")
    if any(not math.isfinite(v) or v < 0.0 or v > 1.0 for v in values):
        raise ValueError(f"rates must lie in [0, 1]: {values}")
    if abs(math.fsum(values) - 1.0) > tol:
        raise ValueError(f"rates must sum to 1 (got {math.fsum(values)!r})")
    return RateVector(*values)


def _renormalize(values: Sequence[float]) -> RateVector:
    total = math.fsum(values)
    assert abs(total - 1.0) < NORM_TOL, f"normalization drift {total - 1.0:.3e}"
    return RateVector(*(v / total for v in values))


def bitflip_round(rates: Sequence[float]) -> tuple[RateVector, float]:
    """One bit-flip rejection round; returns ``(new_rates, survival_fraction)``."""
    qI, qx, qy, qz = check_rates(rates)
    d = (qI + qz) ** 2 + (qx + qy) ** 2
    # qI + qz + qx + qy = 1 keeps d >= 1/2
    assert d > 0.0
    new = _renormalize(((qI * qI + qz * qz) / d, (qx * qx + qy * qy) / d,
                        2.0 * qx * qy / d, 2.0 * qI * qz / d))
    return new, d / 2.0


def phaseflip_round(rates: Sequence[float]) -> tuple[RateVector, float]:
    """One phase-flip rejection round (the bit-flip map with q_x and q_z swapped)."""
    new, survival = bitflip_round(check_rates(rates).swap_xz())
    return new.swap_xz(), survival


class Round(str, enum.Enum):
    BIT_FLIP = "bit"
    PHASE_FLIP = "phase"


_ROUND_MAPS = {Round.BIT_FLIP: bitflip_round, Round.PHASE_FLIP: phaseflip_round}


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    kind: Round
    rates: RateVector
    survival_fraction: float
    cumulative_fraction: float

    @property
    def infidelity(self) -> float:
        # summing the bad rates keeps precision once 1 - q_I underflows
        return self.rates.infidelity


def alternating(n: int) -> list[Round]:
    """The first ``n`` sub-steps of bit, phase, bit, phase, ..."""
    return [Round.BIT_FLIP if s % 2 == 0 else Round.PHASE_FLIP for s in range(n)]


def iterate(initial: Sequence[float], schedule: Sequence[Round | str]) -> list[RoundReport]:
    if not schedule:
        raise ValueError("schedule must be non-empty")
    rates = check_rates(initial)
    cumulative = 1.0
    reports = []
    for index, kind in enumerate(schedule, start=1):
        kind = Round(kind)
        rates, survival = _ROUND_MAPS[kind](rates)
        cumulative *= survival
        reports.append(RoundReport(index, kind, rates, survival, cumulative))
    return reports


def find_schedule(
    initial: Sequence[float], target_infidelity: float, max_rounds: int
) -> list[Round] | None:
    """Shortest alternating schedule with ``1 - q_I <= target_infidelity``.

    ``max_rounds`` counts sub-steps.  Returns None when the target is not
    reached within that budget.
    """
    if not 0.0 < target_infidelity < 1.0:
        raise ValueError("target_infidelity must lie in (0, 1)")
    rates = check_rates(initial)
    if rates.infidelity <= target_infidelity:
        return []
    if max_rounds < 1:
        return None
    schedule = alternating(max_rounds)
    for report in iterate(rates, schedule):
        if report.infidelity <= target_infidelity:
            return schedule[: report.round_index]
    return None


CSV_COLUMNS = ("round", "q_I", "q_x", "q_y", "q_z", "survival", "cumulative", "infidelity")


def report_rows(reports: Iterable[RoundReport]) -> list[dict[str, object]]:
    return [
        {
            "round": r.round_index,
            "q_I": repr(r.rates.q_I),
            "q_x": repr(r.rates.q_x),
            "q_y": repr(r.rates.q_y),
            "q_z": repr(r.rates.q_z),
            "survival": repr(r.survival_fraction),
            "cumulative": repr(r.cumulative_fraction),
            "infidelity": repr(r.infidelity),
        }
        for r in reports
    ]


def reports_to_csv(reports: Iterable[RoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(report_rows(reports))
    return buf.getvalue()
