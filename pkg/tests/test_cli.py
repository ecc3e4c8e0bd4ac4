import json
import subprocess
import sys

import pytest

from treeblocks import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate_b_csv(capsys):
    code, out, _ = run(["enumerate", "--seq", "b", "--n", "10"], capsys)
    assert code == 0
    lines = out.split("\r\n")
    assert lines[0] == "n,b" and len([l for l in lines[1:] if l]) == 11
    assert lines[11] == "10,3463304"


def test_enumerate_json(capsys):
    code, out, _ = run(["enumerate", "--seq", "m", "--n", "3", "--format", "json"], capsys)
    body = json.loads(out)
    assert code == 0 and body["schema"] == 1 and body["values"] == ["1", "2", "10", "70"]


def test_constants(capsys):
    code, out, _ = run(["constants", "--precision", "30"], capsys)
    body = json.loads(out)
    assert code == 0 and body["u_C"].startswith("3.02") and body["rho_B"].startswith("0.091")


def test_constants_near_critical(capsys):
    code, out, _ = run(["constants", "--u", "uC", "--precision", "30", "--N-exact", "400"], capsys)
    body = json.loads(out)
    assert code == 0 and body["regime_constants"]["regime"] == "critical"
    assert body["critical_adjacent"]["c_u_C"].startswith("0.399")


@pytest.mark.parametrize("argv", [[], ["enumerate"], ["enumerate", "--seq", "x", "--n", "3"],
                                  ["constants", "--u", "-1"], ["curve-y", "--steps", "1"]])
def test_usage_errors_exit_2(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_census_and_manifest(tmp_path, capsys):
    out = tmp_path / "census.csv"
    code, _, _ = run(["census", "--n", "2", "--blocks", "--out", str(out)], capsys)
    assert code == 0
    rows = out.read_bytes().decode().split("\r\n")
    assert rows[0] == "word,blocks,block_sizes" and len([r for r in rows[1:] if r]) == 10
    man = json.loads((tmp_path / "census.csv.manifest.json").read_text())
    assert man["schema"] == 1 and man["config"]["command"] == "census"
    assert man["command_line"][1:4] == ["census", "--n", "2"]
    assert "sha256" in json.dumps(man)


def test_sample_map_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for p in (a, b):
        assert run(["sample-map", "--n", "20", "--count", "5", "--seed", "9", "--out", str(p)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().split()) == 5


def test_sample_tree(capsys):
    code, out, _ = run(["sample-tree", "--n", "1000", "--u", "1", "--count", "3", "--N-exact", "200"], capsys)
    rows = [r for r in out.split("\r\n") if r]
    assert code == 0 and rows[0].startswith("replica,LB_1") and len(rows) == 4


def test_experiment_outputs_identical(tmp_path, capsys):
    paths = [tmp_path / "e1.json", tmp_path / "e2.json"]
    for p in paths:
        code, _, _ = run(["experiment", "--name", "height", "--u", "5", "--n", "1000,4000",
                          "--replicas", "100", "--N-exact", "200", "--out", str(p)], capsys)
        assert code in (0, 1)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert "runtime" not in paths[0].read_text()
    man = json.loads((tmp_path / "e1.json.manifest.json").read_text())
    assert "timings_s" in json.dumps(man)


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[enumerate]\nseq = "m"\nn = 4\n')
    code, out, _ = run(["enumerate", "--config", str(cfg)], capsys)
    assert code == 0 and out.split("\r\n")[5] == "4,588"
    code, out, _ = run(["enumerate", "--config", str(cfg), "--n", "2"], capsys)
    assert len([r for r in out.split("\r\n") if r]) == 4


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[enumerate]\nbogus = 1\n')
    assert run(["enumerate", "--config", str(cfg), "--seq", "m", "--n", "2"], capsys)[0] == 2


def test_verify_exit_code():
    r = subprocess.run([sys.executable, "-m", "treeblocks.cli", "verify", "--N", "64", "--census-n", "4"],
                       capture_output=True, text=True, timeout=600)
    assert r.returncode == 0, r.stderr
    assert r.stdout.count("[PASS]") == 7
