import csv
import json
import subprocess
import sys


from bwebsim.cli import main
from bwebsim.io import sha256_file


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SYSTEM = {"kind": "discrete_parity", "window": {"x": [-40, 40], "t": [0, 20]}, "delta": 1.0, "seed": 1}


def test_simulate_deterministic_with_svg(tmp_path):
    cfg = _write(tmp_path / "sys.json", SYSTEM)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a), "--svg"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--svg"]) == 0
    for name in ("family.json", "knots.csv", "family.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    fam = json.loads((a / "family.json").read_text())
    regular = [p for p in fam["paths"] if p["sentinel"] == "none"]
    assert (a / "family.svg").read_text().count("<polyline") == len(regular) > 0


def test_simulate_skeleton(tmp_path):
    cfg = _write(tmp_path / "sk.json", {"kind": "skeleton", "starting_set": [[0, 0], [0.5, 0.2]], "step": 0.01,
                                        "horizon": 1.0, "seed": 3})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    fam = json.loads((tmp_path / "o" / "family.json").read_text())
    assert len(fam["paths"]) == 2


def test_manifest_digests_match(tmp_path):
    cfg = _write(tmp_path / "sys.json", SYSTEM)
    out = tmp_path / "o"
    main(["simulate", "--config", cfg, "--out", str(out), "--svg", "--seed", "9"])
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 9 and man["command"][0] == "bwebsim"
    assert {o["file"] for o in man["outputs"]} == {"family.json", "knots.csv", "family.svg"}
    for o in man["outputs"]:
        assert sha256_file(out / o["file"]) == o["sha256"]


def test_usage_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and err.count("\n") == 1
    odd = _write(tmp_path / "odd.json", {**SYSTEM, "starts": [[1, 0]]})
    assert main(["simulate", "--config", odd, "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--out", str(tmp_path / "o")]) == 2


def test_window_overflow_exit_3(tmp_path):
    cfg = _write(tmp_path / "s.json", {**SYSTEM, "window": {"x": [-3, 3], "t": [0, 400]}, "starts": [[0, 0]]})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def _family(tmp_path):
    fam = [
        {"start": 0, "knots": [[0, 0], [2, 0]], "sentinel": "none"},
        {"start": 0, "knots": [[0, 1], [2, 1]], "sentinel": "none"},
    ]
    return _write(tmp_path / "fam.json", fam)


def test_count_examples(tmp_path):
    fam = _family(tmp_path)
    merged = _write(tmp_path / "m.json", [
        {"start": 0, "knots": [[0, 0], [2, 0]], "sentinel": "none"},
        {"start": 0, "knots": [[0, 1], [0.5, 0], [2, 0]], "sentinel": "none"},
    ])
    qs = _write(tmp_path / "q.json", [{"t0": 0, "t": 1, "a": -0.5, "b": 0.5}, {"t0": 0, "t": 1, "a": -0.5, "b": 1.5}])
    assert main(["count", "--family", fam, "--query", qs, "--out", str(tmp_path / "c1")]) == 0
    q3 = _write(tmp_path / "q3.json", {"t0": 0, "t": 1, "a": -0.5, "b": 1.5})
    assert main(["count", "--family", merged, "--query", q3, "--out", str(tmp_path / "c2")]) == 0
    rows = _rows(tmp_path / "c1" / "count.csv") + _rows(tmp_path / "c2" / "count.csv")
    assert [int(r["eta"]) for r in rows] == [1, 2, 1]
    assert [int(r["n"]) for r in rows] == [1, 2, 1]


def test_count_empty_and_batch(tmp_path):
    fam = _family(tmp_path)
    qs = [{"t0": 0, "t": 1, "a": 5, "b": 6}] + [{"t0": 0, "t": 1, "a": -0.5 + k / 1000, "b": 1.5} for k in range(999)]
    q = _write(tmp_path / "q.json", qs)
    assert main(["count", "--family", fam, "--query", q, "--out", str(tmp_path / "c")]) == 0
    rows = _rows(tmp_path / "c" / "count.csv")
    assert len(rows) == 1000
    assert [int(r["query"]) for r in rows] == list(range(1000))
    assert rows[0]["eta"] == "0" and rows[0]["l"] == "+inf" and rows[0]["r"] == "-inf"
    bad = _write(tmp_path / "bq.json", [{"t0": 0}])
    assert main(["count", "--family", fam, "--query", bad, "--out", str(tmp_path / "c")]) == 2


SUITE = {"seed": 1, "checks": [{"name": "est_eta_mean", "params": {
    "model": {"kind": "discrete_parity", "delta": 0.05}, "query": {"t0": 0, "t": 1, "a": 0, "b": 1}}}]}


def test_verify_exit_codes(tmp_path):
    ok = _write(tmp_path / "ok.json", SUITE)
    assert main(["verify", "--config", ok, "--out", str(tmp_path / "v")]) == 0
    rows = _rows(tmp_path / "v" / "reports.csv")
    assert len(rows) == 1 and rows[0]["verdict"] == "pass"
    assert (tmp_path / "v" / "reports.svg").exists()
    wrong = json.loads(json.dumps(SUITE))
    wrong["checks"][0]["params"]["target"] = 3.0
    assert main(["verify", "--config", _write(tmp_path / "w.json", wrong), "--out", str(tmp_path / "w")]) == 1
    unknown = {"checks": [{"name": "no_such_check"}]}
    assert main(["verify", "--config", _write(tmp_path / "u.json", unknown), "--out", str(tmp_path / "u")]) == 2


def test_verify_independent_of_workers(tmp_path):
    suite = {"seed": 4, "checks": [
        {"name": "est_eta_mean", "params": {"model": {"kind": "discrete_parity", "delta": 0.05},
                                            "query": {"t0": 0, "t": 1, "a": 0, "b": 1}}},
        {"name": "est_B1", "params": {"model": {"kind": "discrete_parity", "delta": 0.05}, "eps": [0.1, 0.2, 0.3]}},
    ]}
    cfg = _write(tmp_path / "s.json", suite)
    for w in ("1", "4"):
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / w), "--workers", w, "--replicas", "700"]) in (0, 1)
    for name in ("reports.csv", "reports.svg"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "4" / name).read_bytes()


def test_plot(tmp_path):
    cfg = _write(tmp_path / "s.json", {"seed": 2, "checks": [
        {"name": "est_B1", "params": {"model": {"kind": "discrete_parity", "delta": 0.05}, "eps": [0.1, 0.2, 0.3]}}]})
    main(["verify", "--config", cfg, "--out", str(tmp_path / "v"), "--replicas", "300"])
    csv_path = str(tmp_path / "v" / "reports.csv")
    assert main(["plot", "--input", csv_path, "--out", str(tmp_path / "p1")]) == 0
    assert main(["plot", "--input", csv_path, "--out", str(tmp_path / "p2")]) == 0
    svg = (tmp_path / "p1" / "reports.svg").read_bytes()
    assert svg == (tmp_path / "p2" / "reports.svg").read_bytes()
    assert b"<svg" in svg
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", "--input", str(empty), "--out", str(tmp_path / "p3")]) == 2
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("schema,a\nother/1,3\n")
    assert main(["plot", "--input", str(wrong), "--out", str(tmp_path / "p3")]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bwebsim", "verify", "--config", str(tmp_path / "missing.json")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and r.stderr.startswith("error:")
    r = subprocess.run([sys.executable, "-m", "bwebsim", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
