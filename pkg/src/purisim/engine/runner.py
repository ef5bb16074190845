"""Two-party Monte-Carlo execution of protocol scripts."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..bell import Basis
from ..dsl import ast
from ..errors import SpecError, Unsupported
from ..rates import RateVector
from ..rng import stream
from .ensemble import ChannelModel, PairEnsemble, distribute
from .parties import ClassicalChannel, Lab, Message, Party

SCHEMA = "purisim.trial/1"


@dataclass(frozen=True)
class RoundStats:
    basis: str
    pairs_in: int
    pairs_out: int
    rates: RateVector | None

    @property
    def survival_fraction(self) -> float:
        return self.pairs_out / self.pairs_in if self.pairs_in else 0.0


@dataclass(frozen=True)
class TestResult:
    accepted: bool
    error_rates: dict[str, float]
    threshold: float
    accepted_at_delta: bool
    accepted_at_delta_minus_eps0: bool | None


@dataclass
class TrialReport:
    accepted: bool
    observed_test_error_rates: dict[str, float]
    final_pair_count: int
    final_empirical_rates: RateVector | None
    key: str | None
    transcript_digest: str
    key_bob: str | None = None
    rounds: list[RoundStats] = field(default_factory=list)
    test: TestResult | None = None

    @property
    def key_disagreement(self) -> float | None:
        if not self.key:
            return None
        a = np.frombuffer(self.key.encode(), dtype=np.uint8)
        b = np.frombuffer(self.key_bob.encode(), dtype=np.uint8)
        return float(np.mean(a != b))

    def to_dict(self) -> dict:
        rates = None if self.final_empirical_rates is None else list(self.final_empirical_rates)
        return {
            "schema": SCHEMA,
            "accepted": self.accepted,
            "observed_test_error_rates": self.observed_test_error_rates,
            "test_verdicts": None if self.test is None else {
                "delta": self.test.accepted_at_delta,
                "delta_minus_eps0": self.test.accepted_at_delta_minus_eps0,
            },
            "final_pair_count": self.final_pair_count,
            "final_empirical_rates": rates,
            "key": self.key,
            "key_bob": self.key_bob,
            "key_disagreement": self.key_disagreement,
            "rounds": [{"basis": r.basis, "pairs_in": r.pairs_in, "pairs_out": r.pairs_out,
                        "survival": r.survival_fraction} for r in self.rounds],
            "transcript_digest": self.transcript_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class Session:
    """One trial: a lab plus two parties talking over a channel.

    Every primitive draws from its own stream keyed by a step counter, so
    results depend only on ``seed`` and the sequence of operations.
    """

    def __init__(self, ensemble: PairEnsemble, seed: int, allow_collective: bool = False):
        self.lab = Lab(ensemble)
        n = len(ensemble)
        self.alice = Party.for_ensemble("alice", n)
        self.bob = Party.for_ensemble("bob", n)
        self.alice.alive[:] = ensemble.alive
        self.bob.alive[:] = ensemble.alive
        self.channel = ClassicalChannel()
        self.seed = seed
        self.allow_collective = allow_collective
        self.counter = 0
        self.test_groups: list[tuple[str, np.ndarray]] = []
        self.trash = np.zeros(n, dtype=bool)
        self.rounds: list[RoundStats] = []

    @property
    def ensemble(self) -> PairEnsemble:
        return self.lab.ensemble

    def _rng(self, who: str) -> np.random.Generator:
        return stream(self.seed, who, self.counter)

    def _tick(self) -> None:
        self.counter += 1

    def _retire(self, idx: np.ndarray, trash: bool) -> None:
        self.lab.retire(idx)
        self.alice.retire(idx)
        self.bob.retire(idx)
        if trash:
            self.trash[idx] = True

    def _exchange(self, kind: str, bits_a: np.ndarray, bits_b: np.ndarray) -> tuple[Message, Message]:
        self.alice.record(bits_a)
        self.bob.record(bits_b)
        to_bob = self.channel.send(self.alice.announce(kind))
        to_alice = self.channel.send(self.bob.announce(kind))
        return to_alice, to_bob

    # error test -------------------------------------------------------------

    def select_test(self, basis: str, count: int, forced: np.ndarray | None = None) -> np.ndarray:
        self._tick()
        if forced is None:
            msg = self.channel.send(self.alice.choose_sample(count, self._rng("alice")))
        else:
            msg = self.channel.send(Message.of_indices("alice", "sample", np.asarray(forced)))
        idx = msg.indices()
        if not self.bob.alive[idx].all():
            raise SpecError("sample contains pairs that are not alive")
        self._retire(idx, trash=True)
        self.test_groups.append((basis, idx))
        return idx

    def measure_test(self, step: ast.Measure) -> None:
        if not self.test_groups:
            raise SpecError(f"{step.kind} test measurement before any TEST sample")
        basis, idx = self.test_groups[-1]
        self._tick()
        wa, wb = step.bases
        if step.kind == "collective":
            if not self.allow_collective:
                raise Unsupported(f"collective measurement (line {step.line}) needs both halves in one lab")
            par = self.lab.measure_collective(idx, wa)
            self.channel.send(Message.of_bits("lab", "test-parity", par))
            self.alice.tally(basis, par)
            self.bob.tally(basis, par)
            return
        a, b = self.lab.measure_local(idx, wa, wb, self._rng("lab"))
        to_alice, to_bob = self._exchange("test-bits", a, b)
        self.alice.tally(basis, self.alice.announced_parity(to_alice))
        self.bob.tally(basis, self.bob.announced_parity(to_bob))

    def evaluate_test(self, delta: float, eps0: float | None = None) -> TestResult:
        rates = self.alice.test_rates()
        if rates != self.bob.test_rates():
            raise AssertionError("parties disagree on test statistics")
        at_delta = all(r <= delta for r in rates.values())
        at_eps = None if eps0 is None else all(r <= delta - eps0 for r in rates.values())
        threshold = delta if eps0 is None else delta - eps0
        accepted = at_delta if eps0 is None else at_eps
        self.test_groups = []
        return TestResult(accepted, rates, threshold, at_delta, at_eps)

    # error rejection -------------------------------------------------------

    def group(self, basis: str, grouping: str = "random", forced: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        if self.alice.groups is not None:
            raise Unsupported("regrouping before the previous groups are resolved")
        self._tick()
        if forced is None:
            msg = self.channel.send(self.alice.choose_pairing(grouping, self._rng("alice")))
        else:
            ctrl, dest = (np.asarray(a, dtype=np.int64) for a in forced)
            inter = np.empty(2 * ctrl.size, dtype=np.int64)
            inter[0::2], inter[1::2] = ctrl, dest
            msg = self.channel.send(Message.of_indices("alice", "pairing", inter))
        ctrl, dest = self.alice.adopt_pairing(msg)
        ctrl_b, dest_b = self.bob.adopt_pairing(msg)
        if not (self.bob.alive[ctrl_b].all() and self.bob.alive[dest_b].all()):
            raise SpecError("pairing contains pairs that are not alive")
        self._pairs_in = int(np.count_nonzero(self.ensemble.alive))
        self._group_basis = basis
        self.lab.bicnot(ctrl, dest, basis)

    def measure_destinations(self, step: ast.Measure) -> None:
        if self.alice.groups is None:
            raise SpecError(f"destination measurement (line {step.line}) without a preceding BICNOT")
        self._tick()
        dest = self.alice.groups[1]
        wa, wb = step.bases
        if step.kind == "collective":
            if not self.allow_collective:
                raise Unsupported(f"collective measurement (line {step.line}) needs both halves in one lab")
            par = self.lab.measure_collective(dest, wa)
            self.channel.send(Message.of_bits("lab", "parity", par))
            self.alice.record(par)
            self.bob.record(par)
            self._peer = {"alice": None, "bob": None}
            self._collective = True
        else:
            a, b = self.lab.measure_local(dest, wa, wb, self._rng("lab"))
            to_alice, to_bob = self._exchange("parity-bits", a, b)
            self._peer = {"alice": to_alice, "bob": to_bob}
            self._collective = False

    def keep_if(self, rule: ast.KeepIf) -> RoundStats:
        if self.alice.outcomes is None or self.alice.groups is None:
            raise SpecError(f"KEEPIF (line {rule.line}) without a measured destination")
        if self._collective and rule.party is not None:
            raise Unsupported("a raw-bit rule cannot follow a collective measurement")
        keep_a = self.alice.keep_mask(rule.value, rule.party, self._peer["alice"])
        keep_b = self.bob.keep_mask(rule.value, rule.party, self._peer["bob"])
        if not np.array_equal(keep_a, keep_b):
            raise AssertionError("parties reached different keep decisions")
        ctrl, dest = self.alice.groups
        self.alice.resolve_groups(keep_a)
        self.bob.resolve_groups(keep_b)
        self.lab.retire(ctrl[~keep_a])
        self.lab.retire(dest)
        self.trash[dest] = True
        stats = RoundStats(self._group_basis, self._pairs_in, self.ensemble.alive_count,
                           self.ensemble.empirical_rates())
        self.rounds.append(stats)
        return stats

    # finish ----------------------------------------------------------------

    def measure_trash(self, step: ast.Measure) -> None:
        self._tick()
        idx = np.flatnonzero(self.trash)
        if step.kind == "collective":
            if not self.allow_collective:
                raise Unsupported(f"collective measurement (line {step.line}) needs both halves in one lab")
            self.channel.send(Message.of_bits("lab", "trash-parity", self.lab.measure_collective(idx, step.basis)))
            return
        a, b = self.lab.measure_local(idx, *step.bases, self._rng("lab"))
        self._exchange("trash-bits", a, b)

    def discard_trash(self) -> None:
        self.trash[:] = False

    def key(self, basis: str) -> tuple[np.ndarray, np.ndarray]:
        self._tick()
        idx = np.flatnonzero(self.alice.alive)
        a, b = self.lab.measure_local(idx, basis, basis, self._rng("lab"))
        self._retire(idx, trash=False)
        return a, b

    def check_views(self) -> None:
        if not (np.array_equal(self.alice.alive, self.bob.alive)
                and np.array_equal(self.alice.alive, self.ensemble.alive)):
            raise AssertionError("party views diverged from the lab")


# -- stand-alone operations -------------------------------------------------

def run_error_test(
    ensemble: PairEnsemble,
    k: int,
    delta: float,
    seed: int,
    eps0: float | None = None,
    sample: np.ndarray | None = None,
) -> tuple[TestResult, PairEnsemble]:
    """Sample 3k alive pairs, measure k per basis and compare against ``delta``.

    ``sample`` forces the 3k tested indices (X group first, then Y, then Z).
    """
    if 3 * k > ensemble.alive_count:
        raise ValueError(f"need {3 * k} alive pairs for the test, have {ensemble.alive_count}")
    session = Session(ensemble.copy(), seed)
    for g, basis in enumerate("XYZ"):
        forced = None if sample is None else np.asarray(sample)[g * k:(g + 1) * k]
        session.select_test(basis, k, forced)
        session.measure_test(ast.Measure("local", basis, "test"))
    return session.evaluate_test(delta, eps0), session.ensemble


def rejection_round(
    ensemble: PairEnsemble,
    basis: str,
    seed: int,
    pairing: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[PairEnsemble, RoundStats]:
    """One bit-flip (``Z``) or phase-flip (``X``) rejection round with local measurements."""
    basis = Basis(basis).value
    if basis not in "ZX":
        raise ValueError("rejection basis must be Z or X")
    session = Session(ensemble.copy(), seed)
    session.group(basis, "random", pairing)
    session.measure_destinations(ast.Measure("local", basis, "destination"))
    stats = session.keep_if(ast.KeepIf(0))
    return session.ensemble, stats


# -- whole protocols ---------------------------------------------------------

def resolve_parameters(spec: ast.ProtocolSpec, overrides: dict | None) -> dict:
    return {**spec.parameters, **{k: v for k, v in (overrides or {}).items() if v is not None}}


def run_protocol(
    spec: ast.ProtocolSpec,
    channel: ChannelModel,
    seed: int,
    params: dict | None = None,
    allow_collective: bool = False,
) -> TrialReport:
    """Execute ``spec`` as Alice and Bob exchanging classical messages.

    ``params`` override the script's PARAM values (N, k, delta, rounds, eps0).
    Collective measurements need ``allow_collective``; read-out Bell
    measurements and opaque gates always raise :class:`Unsupported`.
    """
    values = resolve_parameters(spec, params)
    runner = _Runner(spec, values, channel, seed, allow_collective)
    return runner.run()


class _Runner:
    def __init__(self, spec, values, channel, seed, allow_collective):
        self.spec = spec
        self.values = values
        self.channel_model = channel
        self.seed = seed
        self.allow_collective = allow_collective
        self.session: Session | None = None
        self.test: TestResult | None = None
        self.aborted = False
        self.keys = None
        self.final_idx = None

    def count(self, c: ast.Count) -> int:
        try:
            return self.spec.resolve(c, self.values)
        except KeyError:
            raise SpecError(f"parameter {c!r} has no value") from None

    def run(self) -> TrialReport:
        self._unsupported(self.spec.steps)
        self._block(self.spec.steps)
        self._close_test()
        s = self.session
        if s is None:
            raise SpecError("protocol never distributes pairs")
        if self.aborted:
            return TrialReport(False, self.test.error_rates, 0, None, None, s.channel.digest(),
                               rounds=s.rounds, test=self.test)
        s.check_views()
        if self.keys is not None:
            idx, (a, b) = self.final_idx, self.keys
            key_a = "".join("01"[x] for x in a)
            key_b = "".join("01"[x] for x in b)
        else:
            idx, key_a, key_b = s.ensemble.alive_indices(), None, None
        rates = s.ensemble.empirical_rates(idx)
        observed = self.test.error_rates if self.test else {}
        return TrialReport(True, observed, int(idx.size), rates, key_a or None, s.channel.digest(),
                           key_b or None, s.rounds, self.test)

    def _unsupported(self, steps) -> None:
        problems = list(self._blocked(steps))
        if problems:
            raise Unsupported("; ".join(problems))

    def _blocked(self, steps):
        for step in steps:
            if isinstance(step, ast.Gate):
                yield f"line {step.line}: gate {step.name} has no Bell-label action"
            elif isinstance(step, ast.Measure) and step.kind == "bell":
                yield f"line {step.line}: read-out Bell measurement is not a two-party operation"
            elif isinstance(step, ast.Measure) and step.kind == "collective" and not self.allow_collective:
                yield (f"line {step.line}: collective measurement '{ast.format_step(step)}' "
                       "needs both halves of the pair in one lab")
            elif isinstance(step, ast.Repeat):
                yield from self._blocked(step.body)

    def _close_test(self) -> None:
        s = self.session
        if s is not None and s.test_groups and not self.aborted:
            if "delta" not in self.values:
                raise SpecError("error test needs a 'delta' parameter")
            eps0 = self.values.get("eps0")
            self.test = s.evaluate_test(float(self.values["delta"]), None if eps0 is None else float(eps0))
            self.aborted = not self.test.accepted

    def _block(self, steps) -> None:
        for step in steps:
            if self.aborted:
                return
            in_test = isinstance(step, ast.TestSample) or (isinstance(step, ast.Measure) and step.role == "test")
            if not in_test:
                self._close_test()
                if self.aborted:
                    return
            self._step(step)

    def _step(self, step) -> None:
        s = self.session
        if isinstance(step, ast.Distribute):
            if s is not None:
                raise SpecError("DISTRIBUTE may appear only once")
            ens = distribute(self.count(step.count), self.channel_model, self.seed)
            self.session = Session(ens, self.seed, self.allow_collective)
            return
        if s is None:
            raise SpecError(f"line {step.line}: step before DISTRIBUTE")
        if isinstance(step, ast.DarkBell):
            return  # labels already are the dark-measurement pointer states
        if isinstance(step, ast.TestSample):
            s.select_test(step.basis, self.count(step.count))
        elif isinstance(step, ast.BiCnot):
            s.group(step.basis, step.grouping)
        elif isinstance(step, ast.Measure):
            if step.role == "test":
                s.measure_test(step)
            elif step.role == "destination":
                s.measure_destinations(step)
            else:
                s.measure_trash(step)
        elif isinstance(step, ast.KeepIf):
            s.keep_if(step)
        elif isinstance(step, ast.Discard):
            s.discard_trash()
        elif isinstance(step, ast.Key):
            self.final_idx = np.flatnonzero(s.alice.alive)
            self.keys = s.key(step.basis)
        elif isinstance(step, ast.Repeat):
            for _ in range(self.count(step.count)):
                self._block(step.body)
                if self.aborted:
                    return
        else:
            raise Unsupported(f"line {step.line}: {ast.format_step(step)}")
