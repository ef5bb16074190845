import csv
import io
import json
import math

import pytest

from purisim import rates
from purisim.cli import main
from purisim.dsl import bundled_path


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# schema=")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def config(tmp_path, **fields):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(fields))
    return str(path)


def test_recurse_rounds(capsys):
    code, out, _ = run(["recurse", "--rates", "0.85,0.05,0.05,0.05", "--rounds", "4"], capsys)
    rows = read_csv(out)
    assert code == 0 and len(rows) == 8
    ref = rates.iterate((0.85, 0.05, 0.05, 0.05), rates.alternating(8))
    assert [float(r["infidelity"]) for r in rows] == [r.infidelity for r in ref]


def test_recurse_perfect_and_nonconverging(capsys):
    code, out, _ = run(["recurse", "--rates", "1,0,0,0", "--rounds", "1"], capsys)
    assert code == 0 and all(float(r["infidelity"]) == 0.0 for r in read_csv(out))
    code, out, _ = run(["recurse", "--rates", "0.3,0.3,0.3,0.1"], capsys)
    assert code == 0 and len(read_csv(out)) == 8


def test_recurse_target_and_schedule(capsys):
    code, out, _ = run(["recurse", "--rates", "0.85,0.05,0.05,0.05", "--target", "1e-9", "--format", "json"],
                       capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["rounds"]) == 8 and doc["rounds"][-1]["infidelity"] <= 1e-9
    code, out, _ = run(["recurse", "--rates", "0.7,0.1,0.1,0.1", "--schedule", "bit,bit"], capsys)
    assert code == 0 and [r["round"] for r in read_csv(out)] == ["1", "2"]


@pytest.mark.parametrize("bad", ["0.5,0.5,0.5,0", "1,0,0", "a,b,c,d"])
def test_recurse_invalid_rates(bad, capsys):
    assert run(["recurse", "--rates", bad], capsys)[0] == 2


def test_io_failure(tmp_path, capsys):
    code, _, err = run(["recurse", "--rates", "1,0,0,0", "--out", str(tmp_path / "missing" / "x.csv")], capsys)
    assert code == 1 and "cannot write" in err


def test_bound(capsys):
    assert run(["bound", "--N", "10000", "--delta", "0.1", "--eps0", "0.05"], capsys)[1] == "6.92885e-31\n"
    assert run(["bound", "--N", "1000", "--delta", "0.5", "--eps0", "0.1"], capsys)[1] == "4.53999e-05\n"
    assert run(["bound", "--N", "1000", "--delta", "0.5", "--eps0", "0"], capsys)[0] == 2


def test_simulate_perfect(tmp_path, capsys):
    cfg = config(tmp_path, protocol_file="protocol3.epp", channel={"kind": "iid", "params": {"rates": [1, 0, 0, 0]}},
                 N=5000, k=50, delta=0.15, rounds=2, seed=1, trials=10)
    code, out, _ = run(["simulate", cfg], capsys)
    reports = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and len(reports) == 10
    assert all(r["accepted"] and r["key"] == r["key_bob"] for r in reports)


def test_simulate_bundled_noisy_aggregate(capsys):
    cfg = str(bundled_path("protocol3").parent / "configs" / "noisy.json")
    code, out, _ = run(["simulate", cfg, "--format", "csv"], capsys)
    rows = read_csv(out)
    assert code == 0 and len(rows) == 6
    for row in rows:
        trials = int(row["trials"])
        # binomial spread of the pooled estimate guards against a zero sample spread
        pooled = {"survival": float(row["pairs_in_mean"]) * trials,
                  "infidelity": float(row["pairs_out_mean"]) * trials}
        for field in ("survival", "infidelity"):
            mean, se, p = float(row[f"{field}_mean"]), float(row[f"{field}_se"]), float(row[f"analytic_{field}"])
            sigma = max(se, math.sqrt(p * (1 - p) / pooled[field]))
            assert abs(mean - p) <= 3 * sigma, (row["substep"], field)


def test_simulate_protocol1_is_unsupported(tmp_path, capsys):
    cfg = config(tmp_path, protocol_file=str(bundled_path("protocol1")),
                 channel={"kind": "iid", "params": {"rates": [1, 0, 0, 0]}}, seed=0)
    code, _, err = run(["simulate", cfg], capsys)
    assert code == 4 and "collective measurement" in err and "line 23" in err


def test_simulate_all_aborted(tmp_path, capsys):
    cfg = config(tmp_path, protocol_file="protocol3", channel={"kind": "iid", "params": {"rates": [0.5, 0.2, 0.2, 0.1]}},
                 N=5000, k=500, seed=0, trials=3)
    assert run(["simulate", cfg], capsys)[0] == 3


@pytest.mark.parametrize("fields", [
    {"protocol_file": "protocol3", "channel": {"kind": "iid", "params": {"rates": [1, 0, 0, 0]}}, "bogus": 1},
    {"protocol_file": "protocol3", "channel": {"kind": "iid", "params": {"rates": [1, 0, 0, 0]}}, "N": -5},
    {"protocol_file": "protocol3", "channel": {"kind": "warp", "params": {}}},
    {"channel": {"kind": "iid", "params": {"rates": [1, 0, 0, 0]}}},
    {"protocol_file": "protocol3", "channel": {"kind": "iid", "params": {"rates": [1, 0, 0, 0]}},
     "delta": 0.1, "eps0": 0.2},
])
def test_simulate_config_errors(fields, tmp_path, capsys):
    assert run(["simulate", config(tmp_path, **fields)], capsys)[0] == 2


def test_simulate_missing_config(tmp_path, capsys):
    assert run(["simulate", str(tmp_path / "nope.json")], capsys)[0] == 1


def test_seed_is_drawn_and_printed(tmp_path, capsys):
    code, _, err = run(["verify", "oracle", "--trials", "2"], capsys)
    assert code == 0 and err.startswith("seed: ")


def test_verify_oracle(tmp_path, capsys):
    out = tmp_path / "oracle.json"
    code, _, _ = run(["verify", "oracle", "--trials", "200", "--seed", "7", "--out", str(out)], capsys)
    doc = json.loads(out.read_text())
    assert code == 0 and doc["pass"] and len(doc["claims"]) == 5
    assert all(c["max_deviation"] < 1e-10 for c in doc["claims"])


def test_verify_theorem(capsys):
    code, out, _ = run(["verify", "theorem", "--seed", "0", "--trials", "16"], capsys)
    doc = json.loads(out)
    by_name = {p["protocol"]: p for p in doc["protocols"]}
    assert code == 0 and doc["pass"]
    assert by_name["protocol3"]["pass"] and by_name["protocol1"]["failed_conditions"] == [1]


def test_verify_sampling_single_point(capsys):
    code, out, _ = run(["verify", "sampling", "--seed", "1", "--trials", "100000",
                        "--N", "400", "--k", "120", "--delta", "0.2", "--eps0", "0.1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["points"][0]["pass"]


def test_verify_sampling_reports_failure(capsys):
    code, out, _ = run(["verify", "sampling", "--seed", "1", "--trials", "100000",
                        "--N", "1000", "--k", "100", "--delta", "0.1", "--eps0", "0.03"], capsys)
    assert code == 5 and json.loads(out)["pass"] is False


def test_check(tmp_path, capsys):
    code, out, _ = run(["check", str(bundled_path("protocol3")), "--trials", "8"], capsys)
    assert code == 0 and json.loads(out)["pass"]
    code, out, _ = run(["check", str(bundled_path("neg_condition2")), "--trials", "8"], capsys)
    assert code == 5 and not json.loads(out)["condition2"]["pass"]
    bad = tmp_path / "bad.epp"
    bad.write_text("DISTRIBUTE 3\nBICNOT Q\n")
    code, _, err = run(["check", str(bad)], capsys)
    assert code == 2 and "2:8" in err


def test_outputs_are_byte_identical(tmp_path, capsys):
    cfg = str(bundled_path("protocol3").parent / "configs" / "perfect.json")
    for argv in (["simulate", cfg, "--seed", "5"], ["simulate", cfg, "--seed", "5", "--format", "csv"],
                 ["recurse", "--rates", "0.85,0.05,0.05,0.05"], ["verify", "oracle", "--trials", "5", "--seed", "3"]):
        first = run(argv, capsys)[1]
        assert run(argv, capsys)[1] == first
