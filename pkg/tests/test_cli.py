import hashlib
import json
import os

import pytest

from ermconc.cli import main


def _write(path, text):
    path.write_text(text)
    return str(path)


def _manifest(out):
    with open(os.path.join(out, "manifest.json")) as fh:
        return json.load(fh)


def test_empty_scenario_list(tmp_path):
    cfg = _write(tmp_path / "c.toml", "seed = 1\n")
    out = str(tmp_path / "out")
    assert main(["scenario", "--config", cfg, "--out", out]) == 0
    assert _manifest(out)["entries"] == []


def test_direct_acceptance_config(tmp_path):
    cfg = _write(tmp_path / "c.toml", '[direct]\nn = 200\nsigma = 1.0\npenalty = "ridge"\nlam = 0.1\n'
                                      "replicates = 100000\n")
    out = str(tmp_path / "out")
    assert main(["direct", "--config", cfg, "--out", out]) == 0
    lines = (tmp_path / "out" / "direct.csv").read_text().splitlines()
    assert lines[0] == "t,bound,freq,se,flagged"
    assert len(lines) == 7
    assert all(ln.endswith(",0") for ln in lines[1:])


def test_manifest_lists_every_file_with_hash(tmp_path):
    out = tmp_path / "out"
    assert main(["margin", "--out", str(out), "--seed", "5"]) == 0
    man = _manifest(str(out))
    files = {e["file"] for e in man["entries"]}
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert files == on_disk
    for e in man["entries"]:
        assert e["seed"] == 5 and set(e) == {"file", "scenario", "seed", "sha256"}
        assert hashlib.sha256((out / e["file"]).read_bytes()).hexdigest() == e["sha256"]


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path / "c.toml", "seed = 11\n[curve]\nreplicates = 20\n[direct]\nreplicates = 2000\n"
                                      "[[scenario]]\nid = \"projection-case2\"\nn_list = [100, 200]\n"
                                      "replicates = 5\n")
    hashes = []
    for k, workers in enumerate(("1", "2")):
        out = str(tmp_path / f"out{k}")
        for cmd in ("curve", "scenario"):
            assert main([cmd, "--config", cfg, "--out", out + cmd, "--workers", workers]) == 0
            hashes.append((tmp_path / f"out{k}{cmd}" / "manifest.json").read_bytes())
    assert hashes[0] == hashes[2] and hashes[1] == hashes[3]


def test_json_format(tmp_path):
    out = tmp_path / "out"
    assert main(["expfam", "--out", str(out), "--format", "json"]) == 0
    rows = json.loads((out / "taylor.json").read_text())
    assert set(rows[0]) == {"t", "ratio", "kappa"}


def test_malformed_config_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml", "seed = 1\n[direct\n")
    assert main(["direct", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_bad_field_is_named(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml", '[[scenario]]\nid = "projection-case3"\nq = 3.0\n')
    assert main(["scenario", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "scenario[0]" in err and "q" in err
    cfg = _write(tmp_path / "d.toml", '[direct]\nn = "many"\n')
    assert main(["direct", "--config", cfg, "--out", str(tmp_path / "o2")]) == 1
    assert "direct.n" in capsys.readouterr().err


def test_bad_flags_exit_1(tmp_path):
    assert main(["nonsense"]) == 1
    assert main(["direct", "--format", "xml"]) == 1
    assert main(["direct", "--workers", "0", "--out", str(tmp_path / "o")]) == 1


def test_stray_files_refused(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "notes.txt").write_text("x")
    assert main(["margin", "--out", str(out)]) == 1
    out2 = tmp_path / "out2"
    assert main(["margin", "--out", str(out2)]) == 0
    assert main(["margin", "--out", str(out2)]) == 0  # own previous outputs are replaced


def test_report_empty_and_missing(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml", "")
    out = tmp_path / "out"
    main(["scenario", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out / "manifest.json")]) == 0
    assert "no runs" in capsys.readouterr().out
    assert main(["margin", "--out", str(tmp_path / "m")]) == 0
    os.remove(tmp_path / "m" / "margin.csv")
    assert main(["report", str(tmp_path / "m" / "manifest.json")]) == 1
    assert main(["report", str(tmp_path / "nowhere.json")]) == 1


def test_report_marks_flagged_tail_row(tmp_path, capsys):
    csv = "t,bound,freq,se,flagged\n1.0,0.36,0.1,0.01,0\n2.0,0.13,0.5,0.01,1\n"
    (tmp_path / "direct.csv").write_text(csv)
    entry = {"file": "direct.csv", "scenario": "normal-sequence", "seed": 0,
             "sha256": hashlib.sha256(csv.encode()).hexdigest()}
    (tmp_path / "manifest.json").write_text(json.dumps({"entries": [entry], "flags": []}))
    assert main(["report", str(tmp_path / "manifest.json")]) == 2
    out = capsys.readouterr().out
    assert "[FLAG] normal-sequence" in out and "t=2.0" in out


def test_scenario_dispatch_all_ids(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml", """
[[scenario]]
id = "linearized-ls"
n_list = [100, 400]
replicates = 2
l1_radius = 1.0
[[scenario]]
id = "expfam-density"
n_list = [100, 1000]
[[scenario]]
id = "expfam-regression"
n_list = [200, 800]
[[scenario]]
id = "normal-sequence"
n = 50
replicates = 2000
penalty = "box"
[[scenario]]
id = "projection-case3"
n_list = [100, 200]
replicates = 4
q = 1.5
""")
    out = tmp_path / "out"
    assert main(["scenario", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["report", str(out / "manifest.json")]) == 0
    text = capsys.readouterr().out
    for sid in ("linearized-ls", "expfam-density", "expfam-regression", "normal-sequence", "projection-case3"):
        assert f"[PASS] {sid}" in text
