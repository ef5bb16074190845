"""Bell-state labels with their collective parities and bi-CNOT permutations.

A Bell state is named by two bits ``(phase_bit, flip_bit)``::

    (0, 0) = |phi+>    (1, 0) = |phi->
    (0, 1) = |psi+>    (1, 1) = |psi->

Labels are serialized as one byte ``code = 2 * phase_bit + flip_bit``.
The lookup tables at the bottom of the module are indexed by that code and
are what the Monte-Carlo engine uses on whole arrays of labels.
"""
from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np


class Basis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


class BellLabel(NamedTuple):
    phase_bit: int
    flip_bit: int

    @property
    def code(self) -> int:
        return 2 * self.phase_bit + self.flip_bit

    @classmethod
    def from_code(cls, code: int) -> "BellLabel":
        if not 0 <= int(code) <= 3:
            raise ValueError(f"Bell label code must be in 0..3, got {code}")
        return cls(int(code) >> 1, int(code) & 1)

    @property
    def name(self) -> str:
        return _NAMES[self.code]

    def __str__(self) -> str:
        return self.name


_NAMES = ("phi+", "psi+", "phi-", "psi-")

PHI_PLUS = BellLabel(0, 0)
PHI_MINUS = BellLabel(1, 0)
PSI_PLUS = BellLabel(0, 1)
PSI_MINUS = BellLabel(1, 1)

ALL_LABELS = (PHI_PLUS, PSI_PLUS, PHI_MINUS, PSI_MINUS)  # in code order

#: codes in rate-vector order (q_I, q_x, q_y, q_z) = (phi+, psi+, psi-, phi-)
RATE_ORDER = (PHI_PLUS.code, PSI_PLUS.code, PSI_MINUS.code, PHI_MINUS.code)


def parity(label: BellLabel, basis: Basis | str) -> int:
    """Deterministic outcome of the collective parity measurement ``WW``.

    ZZ reads the flip bit, XX the phase bit and YY their XOR.  The Y value
    assumes Bob's Y detector is relabeled (his raw bit flipped), so that
    |phi+> has parity 0 in every basis.
    """
    basis = Basis(basis)
    i, j = label
    if basis is Basis.Z:
        return j
    if basis is Basis.X:
        return i
    return i ^ j


def bicnot_z(control: BellLabel, destination: BellLabel) -> tuple[BellLabel, BellLabel]:
    """Z-basis bi-CNOT: flip parity collects on the destination."""
    (i, j), (ip, jp) = control, destination
    return BellLabel(i ^ ip, j), BellLabel(ip, jp ^ j)


def bicnot_x(control: BellLabel, destination: BellLabel) -> tuple[BellLabel, BellLabel]:
    """X-basis bi-CNOT (Hadamard-conjugated): phase parity collects on the destination."""
    (i, j), (ip, jp) = control, destination
    return BellLabel(i, j ^ jp), BellLabel(i ^ ip, jp)


def pauli_frame_after_local_measure(
    label: BellLabel, basis: Basis | str
) -> dict[tuple[int, int], float]:
    """Joint distribution of the two parties' bits when both measure ``basis``.

    Alice's bit is uniform and Bob's reported bit equals Alice's XOR the
    pair's parity (Bob's Y bit already relabeled).
    """
    p = parity(label, basis)
    return {(a, a ^ p): 0.5 for a in (0, 1)}


def is_good(label: BellLabel) -> bool:
    return all(parity(label, w) == 0 for w in Basis)


# -- vectorized tables, indexed by label code ------------------------------

PARITY_TABLE = {
    w: np.array([parity(BellLabel.from_code(c), w) for c in range(4)], dtype=np.uint8)
    for w in Basis
}


def _pair_table(fn) -> tuple[np.ndarray, np.ndarray]:
    ctrl = np.empty(16, dtype=np.uint8)
    dest = np.empty(16, dtype=np.uint8)
    for c in range(4):
        for d in range(4):
            nc, nd = fn(BellLabel.from_code(c), BellLabel.from_code(d))
            ctrl[4 * c + d] = nc.code
            dest[4 * c + d] = nd.code
    return ctrl, dest


#: ``BICNOT_TABLE[basis][0][4*c + d]`` is the new control code, ``[1]`` the new destination code
BICNOT_TABLE = {Basis.Z: _pair_table(bicnot_z), Basis.X: _pair_table(bicnot_x)}
