"""Exact density-matrix oracle for up to three Bell pairs.

Qubits are ordered ``A0, B0, A1, B1, ...`` (Alice's and Bob's halves of
pair 0, then pair 1, ...), so every pair is one 4-dimensional tensor factor
with local index ``2 * alice_bit + bob_bit``.  All operations return new
:class:`DenseState` objects.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bell import ALL_LABELS, Basis, BellLabel, parity

MAX_PAIRS = 3
STATE_TOL = 1e-12
PSD_TOL = -1e-10
IDENTITY_TOL = 1e-10

_S = 1.0 / np.sqrt(2.0)


def bell_vector(label: BellLabel) -> np.ndarray:
    i, j = label
    v = np.zeros(4, dtype=complex)
    v[j] = _S  # |0, j>
    v[2 + (1 - j)] = _S * (-1) ** i  # |1, 1-j>
    return v


#: columns are the Bell vectors in label-code order
BELL_BASIS = np.column_stack([bell_vector(lab) for lab in ALL_LABELS])

_LOCAL_BASIS = {
    Basis.Z: np.array([[1, 0], [0, 1]], dtype=complex),
    Basis.X: np.array([[_S, _S], [_S, -_S]], dtype=complex),
    Basis.Y: np.array([[_S, _S], [1j * _S, -1j * _S]], dtype=complex),
}
"""Columns are the single-qubit eigenvectors for outcome 0 and 1."""


@dataclass(frozen=True, eq=False)
class DenseState:
    num_pairs: int
    matrix: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_pairs <= MAX_PAIRS:
            raise ValueError(f"num_pairs must be in 1..{MAX_PAIRS}, got {self.num_pairs}")
        m = np.array(self.matrix, dtype=complex)
        dim = 4**self.num_pairs
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 4**self.num_pairs

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "DenseState":
        v = np.asarray(vector, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(_num_pairs(v.size), np.outer(v, v.conj()))

    @classmethod
    def bell_product(cls, labels: Sequence[BellLabel]) -> "DenseState":
        return cls.from_vector(functools.reduce(np.kron, [bell_vector(lab) for lab in labels]))

    @classmethod
    def bell_diagonal(cls, weights: dict[tuple[BellLabel, ...], float]) -> "DenseState":
        states = [w * cls.bell_product(labels).matrix for labels, w in weights.items()]
        n = len(next(iter(weights)))
        return cls(n, sum(states))

    def validate(self, tol: float = STATE_TOL) -> None:
        """Raise ValueError unless the matrix is a density matrix."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise ValueError(f"trace is {np.trace(m).real}, expected 1")
        if np.linalg.eigvalsh(m).min() < PSD_TOL:
            raise ValueError("matrix is not positive semidefinite")

    def tensor(self, other: "DenseState") -> "DenseState":
        return DenseState(self.num_pairs + other.num_pairs, np.kron(self.matrix, other.matrix))


def _num_pairs(dim: int) -> int:
    n = int(round(np.log(dim) / np.log(4)))
    if 4**n != dim:
        raise ValueError(f"dimension {dim} is not a power of 4")
    return n


def _on_pair(op: np.ndarray, pair: int, num_pairs: int) -> np.ndarray:
    """Embed a 4x4 operator acting on ``pair``."""
    if not 0 <= pair < num_pairs:
        raise IndexError(f"pair {pair} out of range for {num_pairs} pairs")
    eye = np.eye(4 ** pair), np.eye(4 ** (num_pairs - pair - 1))
    return np.kron(np.kron(eye[0], op), eye[1])


def _conj(state: DenseState, op: np.ndarray) -> np.ndarray:
    return op @ state.matrix @ op.conj().T


# -- Bell basis ------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def bell_basis(num_pairs: int) -> np.ndarray:
    """Unitary whose columns are the product Bell states, pair 0 most significant."""
    return functools.reduce(np.kron, [BELL_BASIS] * num_pairs)


def bell_basis_labels(num_pairs: int) -> list[tuple[BellLabel, ...]]:
    return list(itertools.product(ALL_LABELS, repeat=num_pairs))


def in_bell_basis(state: DenseState) -> np.ndarray:
    b = bell_basis(state.num_pairs)
    return b.conj().T @ state.matrix @ b


def dark_bell_measure(state: DenseState) -> DenseState:
    """Bell measurement on every pair with the outcome discarded."""
    b = bell_basis(state.num_pairs)
    diag = np.real(np.diag(in_bell_basis(state)))
    return DenseState(state.num_pairs, (b * diag) @ b.conj().T)


def fidelity(state: DenseState) -> float:
    """Overlap with |phi+> on every pair."""
    return float(np.real(in_bell_basis(state)[0, 0]))


# -- gates -----------------------------------------------------------------

def _cnot_permutation(num_qubits: int, control: int, target: int) -> np.ndarray:
    dim = 2**num_qubits
    idx = np.arange(dim)
    cbit = (idx >> (num_qubits - 1 - control)) & 1
    image = idx ^ (cbit << (num_qubits - 1 - target))
    u = np.zeros((dim, dim))
    u[image, idx] = 1.0
    return u


@functools.lru_cache(maxsize=None)
def bicnot_unitary(num_pairs: int, control_pair: int, dest_pair: int, basis: str) -> np.ndarray:
    """Alice's CNOT times Bob's CNOT; the X variant is conjugated by Hadamards on the four qubits."""
    n = 2 * num_pairs
    u = _cnot_permutation(n, 2 * control_pair, 2 * dest_pair) @ _cnot_permutation(
        n, 2 * control_pair + 1, 2 * dest_pair + 1
    )
    if Basis(basis) is Basis.X:
        h_pair = np.kron(_LOCAL_BASIS[Basis.X], _LOCAL_BASIS[Basis.X])
        h = _on_pair(h_pair, control_pair, num_pairs) @ _on_pair(h_pair, dest_pair, num_pairs)
        u = h @ u @ h
    elif Basis(basis) is not Basis.Z:
        raise ValueError("bi-CNOT basis must be Z or X")
    return u.astype(complex)


def apply_bicnot(state: DenseState, control_pair: int, dest_pair: int, basis: Basis | str) -> DenseState:
    n = state.num_pairs
    if control_pair == dest_pair:
        raise ValueError("control and destination must differ")
    for p in (control_pair, dest_pair):
        if not 0 <= p < n:
            raise IndexError(f"pair {p} out of range for {n} pairs")
    u = bicnot_unitary(n, control_pair, dest_pair, Basis(basis).value)
    return DenseState(n, _conj(state, u))


# -- measurements ----------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One measurement outcome: its Born probability and normalized post-state."""

    outcome: object
    probability: float
    state: DenseState | None


def parity_projectors(basis: Basis | str) -> dict[int, np.ndarray]:
    """Projectors of the collective ``WW`` measurement onto Bell-parity subspaces."""
    out = {0: np.zeros((4, 4), dtype=complex), 1: np.zeros((4, 4), dtype=complex)}
    for lab in ALL_LABELS:
        v = bell_vector(lab)
        out[parity(lab, basis)] += np.outer(v, v.conj())
    return out


def local_projectors(basis_a: Basis | str, basis_b: Basis | str | None = None) -> dict[tuple[int, int], np.ndarray]:
    """Projectors of the local ``W_a (x) W_b`` measurement on one pair.

    Outcomes are ``(alice_bit, bob_bit)``; Bob's Y bit is reported flipped.
    """
    wa = Basis(basis_a)
    wb = wa if basis_b is None else Basis(basis_b)
    out = {}
    for a, b in itertools.product((0, 1), repeat=2):
        raw_b = b ^ 1 if wb is Basis.Y else b
        v = np.kron(_LOCAL_BASIS[wa][:, a], _LOCAL_BASIS[wb][:, raw_b])
        out[(a, b)] = np.outer(v, v.conj())
    return out


def coarse_parity_projectors(basis_a: Basis | str, basis_b: Basis | str | None = None) -> dict[int, np.ndarray]:
    """Sum local projectors by announced parity ``a ^ b``.

    For equal bases this is exactly :func:`parity_projectors`.
    """
    out = {0: np.zeros((4, 4), dtype=complex), 1: np.zeros((4, 4), dtype=complex)}
    for (a, b), p in local_projectors(basis_a, basis_b).items():
        out[a ^ b] += p
    return out


def bell_projectors() -> dict[BellLabel, np.ndarray]:
    return {lab: np.outer(bell_vector(lab), bell_vector(lab).conj()) for lab in ALL_LABELS}


def measure(state: DenseState, pair: int, projectors: dict) -> list[Branch]:
    """Projective measurement of one pair; zero-probability branches carry ``state=None``."""
    branches = []
    for outcome, proj in projectors.items():
        full = _on_pair(proj, pair, state.num_pairs)
        post = full @ state.matrix @ full
        p = float(np.real(np.trace(post)))
        if p > 1e-15:
            branches.append(Branch(outcome, p, DenseState(state.num_pairs, post / p)))
        else:
            branches.append(Branch(outcome, 0.0, None))
    return branches


def measure_collective(state: DenseState, pair: int, basis: Basis | str) -> list[Branch]:
    return measure(state, pair, parity_projectors(basis))


def measure_local(state: DenseState, pair: int, basis: Basis | str, basis_b: Basis | str | None = None) -> list[Branch]:
    return measure(state, pair, local_projectors(basis, basis_b))


def average(branches: Sequence[Branch]) -> DenseState:
    """Outcome-averaged state of a measurement."""
    live = [b for b in branches if b.state is not None]
    return DenseState(live[0].state.num_pairs, sum(b.probability * b.state.matrix for b in live))


def partial_trace(state: DenseState, keep: Sequence[int] | set[int]) -> DenseState:
    keep = sorted(set(keep))
    n = state.num_pairs
    if not keep:
        raise ValueError("keep must name at least one pair")
    if any(not 0 <= p < n for p in keep):
        raise IndexError(f"keep {keep} out of range for {n} pairs")
    drop = [p for p in range(n) if p not in keep]
    t = state.matrix.reshape((4,) * (2 * n))
    # contract dropped pairs from the highest index down so axis numbers stay valid
    for p in reversed(drop):
        t = np.trace(t, axis1=p, axis2=p + t.ndim // 2)
    d = 4 ** len(keep)
    return DenseState(len(keep), t.reshape(d, d))


def trace_distance(a: DenseState | np.ndarray, b: DenseState | np.ndarray) -> float:
    ma = a.matrix if isinstance(a, DenseState) else a
    mb = b.matrix if isinstance(b, DenseState) else b
    diff = ma - mb
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


# -- random states ---------------------------------------------------------

def random_pure(num_pairs: int, rng: np.random.Generator) -> DenseState:
    dim = 4**num_pairs
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return DenseState.from_vector(v)


def random_mixed(num_pairs: int, rng: np.random.Generator) -> DenseState:
    """Reduced state of a random pure state on ``num_pairs + 1`` pairs."""
    dim = 4**num_pairs
    v = rng.standard_normal(dim * 4) + 1j * rng.standard_normal(dim * 4)
    v = (v / np.linalg.norm(v)).reshape(dim, 4)
    return DenseState(num_pairs, v @ v.conj().T)


# -- verification suites ---------------------------------------------------

@dataclass
class ClaimReport:
    claim: str
    trials: int
    max_deviation: float
    tolerance: float = IDENTITY_TOL

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation < self.tolerance)

    def to_dict(self) -> dict:
        return {"claim": self.claim, "trials": self.trials,
                "max_deviation": self.max_deviation, "pass": self.passed}


def reports_to_json(reports: Sequence[ClaimReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def _maxabs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def branch_deviation(first: Sequence[Branch], second: Sequence[Branch]) -> float:
    """Largest difference in outcome probabilities or post-states between two measurements."""
    dev = 0.0
    for x, y in zip(first, second, strict=True):
        assert x.outcome == y.outcome
        dev = max(dev, abs(x.probability - y.probability))
        if x.state is not None and y.state is not None:
            dev = max(dev, _maxabs(x.state.matrix, y.state.matrix))
        elif (x.state is None) != (y.state is None):
            dev = max(dev, x.probability, y.probability)
    return dev


def commutation_deviation(state: DenseState, pair: int, projectors: dict) -> float:
    """Compare measure-then-dark against dark-then-measure for one projective measurement."""
    first = [
        Branch(b.outcome, b.probability, None if b.state is None else dark_bell_measure(b.state))
        for b in measure(state, pair, projectors)
    ]
    second = measure(dark_bell_measure(state), pair, projectors)
    return branch_deviation(first, second)


def commutes_with_dark_bell(projectors: dict, trials: int, rng: np.random.Generator) -> float:
    """Max commutation deviation of a one-pair measurement over random two-pair states."""
    return max(commutation_deviation(random_mixed(2, rng), 0, projectors) for _ in range(trials))


def verify_commutation(trial_count: int, seed: int) -> list[ClaimReport]:
    """Check the dark-Bell commutation and fidelity-invariance identities on random 2-pair states."""
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    rng = np.random.default_rng(seed)
    dev_cnot = dev_meas = dev_fid = 0.0
    for _ in range(trial_count):
        rho = random_mixed(2, rng)
        dark = dark_bell_measure(rho)
        for basis, (c, d) in itertools.product("ZX", ((0, 1), (1, 0))):
            # a closing dark measurement is a no-op on the first ordering
            early = dark_bell_measure(apply_bicnot(dark, c, d, basis))
            late = dark_bell_measure(apply_bicnot(rho, c, d, basis))
            dev_cnot = max(dev_cnot, _maxabs(early.matrix, late.matrix))
        for pair, basis in itertools.product(range(2), Basis):
            dev_meas = max(dev_meas, commutation_deviation(rho, pair, parity_projectors(basis)))
        dev_fid = max(dev_fid, abs(fidelity(dark) - fidelity(rho)))
    return [
        ClaimReport("bicnot commutes with dark Bell measurement", trial_count, dev_cnot),
        ClaimReport("collective parity measurement commutes with dark Bell measurement", trial_count, dev_meas),
        ClaimReport("dark Bell measurement preserves fidelity", trial_count, dev_fid),
    ]


def verify_trash_measurement(trial_count: int, seed: int) -> list[ClaimReport]:
    """Measuring a trash pair and averaging over outcomes leaves the kept pair untouched.

    Pair 1 is the trash pair; pair 0 is kept and pair 2 purifies the state.
    """
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    rng = np.random.default_rng(seed)
    dev_local = dev_coll = 0.0
    for _ in range(trial_count):
        rho = random_mixed(3, rng) if rng.random() < 0.5 else random_pure(3, rng)
        kept = partial_trace(rho, {0})
        for basis in Basis:
            after = partial_trace(average(measure_local(rho, 1, basis)), {0})
            dev_local = max(dev_local, trace_distance(kept, after))
            after = partial_trace(average(measure_collective(rho, 1, basis)), {0})
            dev_coll = max(dev_coll, trace_distance(kept, after))
    return [
        ClaimReport("local trash measurement leaves kept reduced state unchanged", trial_count, dev_local),
        ClaimReport("collective trash measurement leaves kept reduced state unchanged", trial_count, dev_coll),
    ]
