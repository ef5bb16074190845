"""Acceptance criteria, each at its stated tolerance.

Run under pytest (a summary line per criterion is printed at the end of the
session) or directly with ``python tests/test_acceptance.py``.
"""
import math
import sys
import tempfile
import time
from pathlib import Path


from purisim import oracle, rates
from purisim.cli import main as cli_main
from purisim.dsl import NEGATIVE, bundled_path, check, load_bundled
from purisim.engine import DESK_GRID, IidBellDiagonal, distribute, rejection_round, run_protocol, verify_sampling_bound

RESULTS: dict[int, tuple[str, bool, str]] = {}


def record(number, title, passed, detail):
    RESULTS[number] = (title, passed, detail)
    return passed, detail


def summary_lines():
    return [f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
            for n, (title, ok, detail) in sorted(RESULTS.items())]


def criterion_1():
    start = time.perf_counter()
    claims = oracle.verify_commutation(200, seed=1)
    elapsed = time.perf_counter() - start
    worst = max(c.max_deviation for c in claims)
    ok = all(c.passed for c in claims) and worst < 1e-10 and elapsed < 10
    return record(1, "commutation suite", ok, f"200 states, max deviation {worst:.2e}, {elapsed:.1f} s")


def criterion_2():
    claims = oracle.verify_trash_measurement(200, seed=1)
    worst = max(c.max_deviation for c in claims)
    return record(2, "trash measurement suite", all(c.passed for c in claims) and worst < 1e-10,
                  f"200 states, max trace distance {worst:.2e}")


def criterion_3():
    failed = {name: check(load_bundled(name)).failed_conditions for name in ("protocol3", "protocol1", *NEGATIVE)}
    ok = (failed["protocol3"] == [] and 1 in failed["protocol1"]
          and all(failed[name] == [cond] for name, cond in NEGATIVE.items()))
    return record(3, "condition checker", ok, ", ".join(f"{n} fails {f}" for n, f in failed.items()))


GRID_4 = [(0.7, 0.1, 0.1, 0.1), (0.85, 0.05, 0.05, 0.05), (0.9, 0.04, 0.03, 0.03), (0.6, 0.2, 0.1, 0.1),
          (0.25, 0.25, 0.25, 0.25)]


def criterion_4():
    n = 10**6
    start = time.perf_counter()
    worst = 0.0  # largest deviation in units of the binomial standard error
    for i, q in enumerate(GRID_4):
        for basis, fn in (("Z", rates.bitflip_round), ("X", rates.phaseflip_round)):
            expect, survival = fn(q)
            ens = distribute(n, IidBellDiagonal(q), seed=100 + i)
            _, stats = rejection_round(ens, basis, seed=200 + i)
            m = stats.pairs_out
            for e, x in zip(stats.rates, expect):
                se = math.sqrt(x * (1 - x) / m)
                worst = max(worst, abs(e - x) / se if se else (math.inf if e != x else 0.0))
            d = 2 * survival
            worst = max(worst, abs(stats.survival_fraction - survival) / math.sqrt(d * (1 - d) / (2 * n)))
    elapsed = time.perf_counter() - start
    return record(4, "recursion vs Monte-Carlo", worst <= 3 and elapsed < 30,
                  f"worst deviation {worst:.2f} sigma over 5 rate vectors x 2 rounds, {elapsed:.1f} s")


def criterion_5():
    t0 = 0.05
    reports = rates.iterate((1 - 3 * t0, t0, t0, t0), rates.alternating(8))
    inf = [reports[2 * g - 1].infidelity for g in range(1, 5)]
    per_round = [reports[2 * g - 2].survival_fraction * reports[2 * g - 1].survival_fraction for g in range(1, 5)]
    c = inf[0] / (4 * t0**2)
    bound = [c * 4**g * t0 ** (2**g) for g in range(1, 5)]
    monotone = all(a > b for a, b in zip(inf, inf[1:]))
    within = [x <= b * (1 + 1e-12) for x, b in zip(inf, bound)]
    survival_ok = all(0.125 <= s <= 0.5 for s in per_round)
    ok = monotone and c <= 10 and all(within) and survival_ok
    worst = max(range(4), key=lambda g: inf[g] / bound[g])
    detail = (f"C={c:.3f}, infidelity {['%.3e' % x for x in inf]}, bound {['%.3e' % b for b in bound]}, "
              f"worst ratio {inf[worst] / bound[worst]:.3g} at g={worst + 1}, per-round survival "
              f"{['%.3f' % s for s in per_round]}")
    return record(5, "convergence order", ok, detail)


def criterion_6():
    start = time.perf_counter()
    failing = []
    for q in DESK_GRID:
        report = verify_sampling_bound(q, 10**6, seed=6)
        if not report.passed:
            failing.append(f"(N={q.N}, k={q.k}, delta={q.delta}, eps0={q.eps0}): "
                           f"{report.empirical:.3e} > {report.bound:.3e}")
    elapsed = time.perf_counter() - start
    detail = f"{len(DESK_GRID)} points, 10^6 trials each, {elapsed:.1f} s"
    if failing:
        detail += "; violated at " + "; ".join(failing)
    return record(6, "sampling bound", not failing and elapsed < 60, detail)


def criterion_7():
    spec = load_bundled("protocol3")
    perfect = IidBellDiagonal((1.0, 0.0, 0.0, 0.0))
    keys_ok = 0
    for trial in range(100):
        r = run_protocol(spec, perfect, seed=trial, params={"N": 20000, "k": 200, "rounds": 3})
        keys_ok += bool(r.accepted and r.key and r.key == r.key_bob)
    q = (0.85, 0.05, 0.05, 0.05)
    r = run_protocol(spec, IidBellDiagonal(q), seed=7, params={"N": 10**6, "rounds": 3})
    final = rates.iterate(q, rates.alternating(6))[-1].rates
    p = final.q_x + final.q_y
    sigma = math.sqrt(p * (1 - p) / r.final_pair_count)
    diff = abs(r.key_disagreement - p)
    ok = keys_ok == 100 and r.accepted and diff <= 3 * sigma
    return record(7, "end-to-end protocol 3", ok,
                  f"perfect keys identical in {keys_ok}/100 trials; noisy key of {r.final_pair_count} bits, "
                  f"disagreement {r.key_disagreement:.3e} vs analytic {p:.3e} (3 sigma = {3 * sigma:.2e})")


def criterion_8():
    cfg = str(bundled_path("protocol3").parent / "configs" / "noisy.json")
    commands = [
        ["recurse", "--rates", "0.85,0.05,0.05,0.05", "--rounds", "4"],
        ["recurse", "--rates", "0.85,0.05,0.05,0.05", "--rounds", "4", "--format", "json"],
        ["simulate", cfg, "--seed", "8"],
        ["simulate", cfg, "--seed", "8", "--format", "csv"],
        ["verify", "oracle", "--trials", "20", "--seed", "8"],
        ["verify", "sampling", "--trials", "10000", "--seed", "8", "--N", "1000", "--k", "100",
         "--delta", "0.1", "--eps0", "0.03"],
    ]
    identical = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, argv in enumerate(commands):
            outputs = []
            for rep in range(2):
                path = Path(tmp) / f"{i}-{rep}"
                cli_main(argv + ["--out", str(path)])
                outputs.append(path.read_bytes())
            identical += outputs[0] == outputs[1] and len(outputs[0]) > 0
    return record(8, "determinism", identical == len(commands),
                  f"{identical}/{len(commands)} CLI outputs byte-identical across repeated runs")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


def _assert(result):
    passed, detail = result
    assert passed, detail


def test_criterion_1_commutation():
    _assert(criterion_1())


def test_criterion_2_trash_measurement():
    _assert(criterion_2())


def test_criterion_3_condition_checker():
    _assert(criterion_3())


def test_criterion_4_recursion_agreement():
    _assert(criterion_4())


def test_criterion_5_convergence_order():
    _assert(criterion_5())


def test_criterion_6_sampling_bound():
    _assert(criterion_6())


def test_criterion_7_end_to_end():
    _assert(criterion_7())


def test_criterion_8_determinism():
    _assert(criterion_8())


if __name__ == "__main__":
    for fn in CRITERIA:
        fn()
    print("\n".join(summary_lines()))
    sys.exit(0 if all(ok for _, ok, _ in RESULTS.values()) else 1)
