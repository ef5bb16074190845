"""Ensembles of Bell-labeled pairs and the channels that produce them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..bell import RATE_ORDER
from ..rates import RateVector, check_rates
from ..rng import stream

_RATE_CODES = np.array(RATE_ORDER, dtype=np.uint8)


@dataclass
class PairEnsemble:
    """N shared pairs: one label code per pair and an alive flag."""

    labels: np.ndarray
    alive: np.ndarray = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.alive is None:
            self.alive = np.ones(self.labels.size, dtype=bool)
        self.alive = np.asarray(self.alive, dtype=bool)
        if self.alive.shape != self.labels.shape:
            raise ValueError("labels and alive mask must have the same length")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def alive_count(self) -> int:
        return int(np.count_nonzero(self.alive))

    def alive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def copy(self) -> "PairEnsemble":
        return PairEnsemble(self.labels.copy(), self.alive.copy())

    def counts(self, indices: np.ndarray | None = None) -> np.ndarray:
        """Counts of (phi+, psi+, psi-, phi-) among ``indices`` (default: alive pairs)."""
        sel = self.labels[self.alive_indices() if indices is None else indices]
        by_code = np.bincount(sel, minlength=4)
        return by_code[_RATE_CODES]

    def empirical_rates(self, indices: np.ndarray | None = None) -> RateVector | None:
        counts = self.counts(indices)
        total = counts.sum()
        if total == 0:
            return None
        return RateVector(*(float(c) / float(total) for c in counts))


# -- channel models --------------------------------------------------------

@dataclass(frozen=True)
class IidBellDiagonal:
    rates: RateVector

    def __post_init__(self):
        object.__setattr__(self, "rates", check_rates(self.rates))


@dataclass(frozen=True)
class BlockCorrelated:
    """Consecutive blocks of ``block_len`` pairs cycle through ``block_rates``."""

    block_rates: tuple[RateVector, ...]
    block_len: int

    def __post_init__(self):
        if not self.block_rates:
            raise ValueError("block_rates must be non-empty")
        if self.block_len < 1:
            raise ValueError("block_len must be >= 1")
        object.__setattr__(self, "block_rates", tuple(check_rates(r) for r in self.block_rates))


@dataclass(frozen=True)
class AdversarialPermutation:
    """A fixed bad-pair budget, planted as runs of identical bad labels.

    Exactly ``round(N * q)`` pairs of each bad type are placed in contiguous
    runs (neighbours share a label, so a sequential pairing would pass every
    bad group); ``seed`` picks a cyclic offset of the whole arrangement.
    """

    rates: RateVector
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rates", check_rates(self.rates))


ChannelModel = Union[IidBellDiagonal, BlockCorrelated, AdversarialPermutation]


def _draw(rates: RateVector, n: int, rng: np.random.Generator) -> np.ndarray:
    return _RATE_CODES[rng.choice(4, size=n, p=np.asarray(rates, dtype=float))]


def distribute(n: int, channel: ChannelModel, seed: int) -> PairEnsemble:
    if n < 1:
        raise ValueError("N must be >= 1")
    rng = stream(seed, "distribute")
    if isinstance(channel, IidBellDiagonal):
        return PairEnsemble(_draw(channel.rates, n, rng))
    if isinstance(channel, BlockCorrelated):
        labels = np.empty(n, dtype=np.uint8)
        for b, start in enumerate(range(0, n, channel.block_len)):
            stop = min(start + channel.block_len, n)
            labels[start:stop] = _draw(channel.block_rates[b % len(channel.block_rates)], stop - start, rng)
        return PairEnsemble(labels)
    if isinstance(channel, AdversarialPermutation):
        budget = [int(round(n * q)) for q in channel.rates[1:]]
        if sum(budget) > n:
            raise ValueError("bad-pair budget exceeds N")
        runs = [np.full(c, code, dtype=np.uint8) for c, code in zip(budget, _RATE_CODES[1:])]
        labels = np.concatenate(runs + [np.zeros(n - sum(budget), dtype=np.uint8)])
        offset = int(stream(channel.seed, "adversary").integers(n))
        return PairEnsemble(np.roll(labels, offset))
    raise TypeError(f"unknown channel model {channel!r}")


CHANNEL_KINDS = ("iid", "block", "adversarial")


def channel_from_config(cfg: dict) -> ChannelModel:
    """Build a channel from ``{"kind": ..., "params": {...}}``."""
    kind = cfg.get("kind")
    params = dict(cfg.get("params", {}))
    extra = set(cfg) - {"kind", "params"}
    if extra:
        raise ValueError(f"unknown channel keys: {sorted(extra)}")
    allowed = {"iid": {"rates"}, "block": {"block_rates", "block_len"}, "adversarial": {"rates", "seed"}}
    if kind not in allowed:
        raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}, got {kind!r}")
    if set(params) - allowed[kind]:
        raise ValueError(f"unknown {kind} channel params: {sorted(set(params) - allowed[kind])}")
    try:
        if kind == "iid":
            return IidBellDiagonal(params["rates"])
        if kind == "block":
            return BlockCorrelated(tuple(params["block_rates"]), int(params["block_len"]))
        return AdversarialPermutation(params["rates"], int(params.get("seed", 0)))
    except KeyError as exc:
        raise ValueError(f"{kind} channel needs parameter {exc.args[0]!r}") from None


def channel_to_config(channel: ChannelModel) -> dict:
    if isinstance(channel, IidBellDiagonal):
        return {"kind": "iid", "params": {"rates": list(channel.rates)}}
    if isinstance(channel, BlockCorrelated):
        return {"kind": "block", "params": {"block_rates": [list(r) for r in channel.block_rates],
                                            "block_len": channel.block_len}}
    return {"kind": "adversarial", "params": {"rates": list(channel.rates), "seed": channel.seed}}
