"""The two parties and the classical channel between them.

A party sees only its own measurement bits and the messages it receives.
The shared quantum state lives in :class:`Lab`, which hands each party its
own outcomes and never its partner's.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..bell import BICNOT_TABLE, PARITY_TABLE, Basis
from .ensemble import PairEnsemble


@dataclass(frozen=True)
class Message:
    sender: str
    kind: str
    payload: bytes

    @classmethod
    def of_bits(cls, sender: str, kind: str, bits: np.ndarray) -> "Message":
        return cls(sender, kind, np.packbits(bits.astype(np.uint8)).tobytes() + len(bits).to_bytes(8, "little"))

    def bits(self) -> np.ndarray:
        n = int.from_bytes(self.payload[-8:], "little")
        return np.unpackbits(np.frombuffer(self.payload[:-8], dtype=np.uint8), count=n)

    @classmethod
    def of_indices(cls, sender: str, kind: str, idx: np.ndarray) -> "Message":
        return cls(sender, kind, np.ascontiguousarray(idx, dtype="<i8").tobytes())

    def indices(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype="<i8")


class ClassicalChannel:
    """Authenticated public channel; keeps a running digest of every message."""

    def __init__(self):
        self._hash = hashlib.sha256()
        self.log: list[tuple[str, str, int]] = []

    def send(self, msg: Message) -> Message:
        header = f"{msg.sender}|{msg.kind}|{len(msg.payload)}|".encode()
        self._hash.update(header)
        self._hash.update(msg.payload)
        self.log.append((msg.sender, msg.kind, len(msg.payload)))
        return msg

    def digest(self) -> str:
        return self._hash.hexdigest()


@dataclass
class Party:
    name: str
    alive: np.ndarray
    outcomes: np.ndarray | None = None
    groups: tuple[np.ndarray, np.ndarray] | None = None
    tallies: dict[str, list[int]] = field(default_factory=dict)

    @classmethod
    def for_ensemble(cls, name: str, n: int) -> "Party":
        return cls(name, np.ones(n, dtype=bool))

    # selections (made by one side, adopted by the other) --------------------

    def choose_sample(self, count: int, rng: np.random.Generator) -> Message:
        pool = np.flatnonzero(self.alive)
        if count > pool.size:
            raise ValueError(f"cannot sample {count} pairs from {pool.size} alive")
        pick = np.sort(rng.choice(pool, size=count, replace=False))
        return Message.of_indices(self.name, "sample", pick)

    def choose_pairing(self, grouping: str, rng: np.random.Generator) -> Message:
        pool = np.flatnonzero(self.alive)
        order = rng.permutation(pool) if grouping == "random" else pool
        usable = order[: order.size // 2 * 2]
        return Message.of_indices(self.name, "pairing", usable)

    def adopt_pairing(self, msg: Message) -> tuple[np.ndarray, np.ndarray]:
        idx = msg.indices()
        self.groups = (idx[0::2], idx[1::2])
        return self.groups

    def retire(self, idx: np.ndarray) -> None:
        self.alive[idx] = False

    # measurement announcements ---------------------------------------------

    def record(self, bits: np.ndarray) -> None:
        self.outcomes = bits

    def announce(self, kind: str) -> Message:
        return Message.of_bits(self.name, kind, self.outcomes)

    def announced_parity(self, peer: Message) -> np.ndarray:
        return self.outcomes ^ peer.bits()

    def keep_mask(self, value: int, party: str | None, peer: Message | None) -> np.ndarray:
        """Which current groups keep their control, from own bits and the peer's message only.

        ``peer`` is None after a collective measurement, whose shared parity
        is already this party's record.
        """
        if peer is None:
            bit = self.outcomes
        elif party is None:
            bit = self.announced_parity(peer)
        elif party == self.name:
            bit = self.outcomes
        else:
            bit = peer.bits()
        return bit == value

    def resolve_groups(self, keep: np.ndarray) -> None:
        ctrl, dest = self.groups
        self.alive[dest] = False
        self.alive[ctrl[~keep]] = False
        self.groups = None
        self.outcomes = None

    def tally(self, basis: str, parities: np.ndarray) -> None:
        ones, total = self.tallies.get(basis, [0, 0])
        self.tallies[basis] = [ones + int(parities.sum()), total + int(parities.size)]

    def test_rates(self) -> dict[str, float]:
        return {b: (ones / total if total else 0.0) for b, (ones, total) in sorted(self.tallies.items())}


class Lab:
    """The pairs themselves, held at Bell-label level."""

    def __init__(self, ensemble: PairEnsemble):
        self.ensemble = ensemble

    def bicnot(self, ctrl: np.ndarray, dest: np.ndarray, basis: str) -> None:
        new_c, new_d = BICNOT_TABLE[Basis(basis)]
        lab = self.ensemble.labels
        key = lab[ctrl].astype(np.intp) * 4 + lab[dest]
        lab[ctrl] = new_c[key]
        lab[dest] = new_d[key]

    def measure_local(self, idx: np.ndarray, wa: str, wb: str, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Sample both sides' bits for ``W_a (x) W_b``; Bob's Y bit is reported flipped."""
        a = rng.integers(0, 2, size=idx.size, dtype=np.uint8)
        if wa == wb:
            b = a ^ PARITY_TABLE[Basis(wa)][self.ensemble.labels[idx]]
        else:
            # different bases on the two halves of a Bell pair are uncorrelated
            b = rng.integers(0, 2, size=idx.size, dtype=np.uint8)
        return a, b

    def measure_collective(self, idx: np.ndarray, basis: str) -> np.ndarray:
        return PARITY_TABLE[Basis(basis)][self.ensemble.labels[idx]]

    def retire(self, idx: np.ndarray) -> None:
        self.ensemble.alive[idx] = False
