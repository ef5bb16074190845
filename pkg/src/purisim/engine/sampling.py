"""Sampling bound for the error test and its Monte-Carlo check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import Unsupported
from ..rng import stream


@dataclass(frozen=True)
class SamplingBoundQuery:
    N: int
    k: int | None
    delta: float
    eps0: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 < self.eps0 < self.delta < 1.0:
            raise ValueError("need 0 < eps0 < delta < 1")
        if self.k is not None and not (1 <= self.k and 3 * self.k < self.N):
            raise ValueError("need 1 <= k and 3k < N")


def sampling_bound(query: SamplingBoundQuery) -> float:
    """``exp(-eps0**2 * N / (4 * (delta - delta**2)))``."""
    d = query.delta
    return math.exp(-0.25 * query.eps0**2 * query.N / (d - d * d))


def sample_size_bound(query: SamplingBoundQuery) -> float:
    """The same expression with the sample size ``k`` in place of ``N``."""
    d = query.delta
    return math.exp(-0.25 * query.eps0**2 * query.k / (d - d * d))


@dataclass(frozen=True)
class SamplingReport:
    query: SamplingBoundQuery
    trials: int
    bad_pairs: int
    accept_threshold: int
    empirical: float
    stderr: float
    bound: float
    sample_size_bound: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 3.0 * self.stderr

    def to_dict(self) -> dict:
        q = self.query
        return {
            "claim": "hypergeometric tail below exp[-eps0^2 N / (4 (delta - delta^2))]",
            "N": q.N, "k": q.k, "delta": q.delta, "eps0": q.eps0,
            "trials": self.trials, "bad_pairs": self.bad_pairs,
            "accept_threshold": self.accept_threshold,
            "empirical": self.empirical, "stderr": self.stderr,
            "bound": self.bound, "sample_size_bound": self.sample_size_bound,
            "max_deviation": self.empirical - self.bound,
            "pass": self.passed,
        }


def worst_case_population(query: SamplingBoundQuery) -> int:
    """Smallest bad count strictly above ``delta * N``."""
    return math.floor(query.delta * query.N + 1e-9) + 1


def accept_threshold(query: SamplingBoundQuery) -> int:
    """Largest number of bad test pairs that still counts as at most ``(delta - eps0) k``."""
    return math.floor((query.delta - query.eps0) * query.k + 1e-9)


def verify_sampling_bound(
    query: SamplingBoundQuery, trials: int, seed: int, bad_pairs: int | None = None
) -> SamplingReport:
    """Estimate P(sample of k shows <= (delta - eps0) k bad | population has > delta N bad).

    The population defaults to the worst case, ``floor(delta N) + 1`` bad pairs.
    """
    if query.k is None:
        raise ValueError("verification needs the sample size k")
    bound = sampling_bound(query)
    if bound < 10.0 / trials:
        raise Unsupported(f"bound {bound:.3e} is below the Monte-Carlo resolution 10/trials = {10.0 / trials:.1e}")
    bad = worst_case_population(query) if bad_pairs is None else bad_pairs
    if not query.delta * query.N < bad <= query.N:
        raise ValueError("population must hold more than delta * N bad pairs")
    rng = stream(seed, "sampling", query.N, query.k, bad)
    hits = rng.hypergeometric(bad, query.N - bad, query.k, size=trials)
    thr = accept_threshold(query)
    freq = float(np.count_nonzero(hits <= thr)) / trials
    stderr = math.sqrt(max(bound * (1.0 - bound), freq * (1.0 - freq)) / trials)
    return SamplingReport(query, trials, bad, thr, freq, stderr, bound, sample_size_bound(query))


#: desk-scale grid used by ``verify sampling --preset desk``
DESK_GRID = (
    SamplingBoundQuery(500, 100, 0.2, 0.1),
    SamplingBoundQuery(1000, 100, 0.1, 0.03),
    SamplingBoundQuery(400, 120, 0.2, 0.1),
    SamplingBoundQuery(1000, 300, 0.1, 0.05),
    SamplingBoundQuery(300, 90, 0.3, 0.15),
    SamplingBoundQuery(600, 190, 0.25, 0.1),
    SamplingBoundQuery(50, 15, 0.2, 0.18),
)
