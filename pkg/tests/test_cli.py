import csv
import io
import json
import subprocess
import sys

import pytest

from ontic.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_verify_bb_exact(capsys):
    code, out, _ = run(capsys, "verify", "bb", "--pairs", "5", "--seed", "7")
    assert code == EXIT_OK
    recs = records(out)
    assert len(recs) == 5
    assert all(r["verdict"] == "pass" and r["se"] == 0 for r in recs)
    assert set(recs[0]) == {"check", "model", "inputs", "estimate", "se", "verdict", "anchor", "details"}


def test_verify_ks_small(capsys):
    code, out, _ = run(capsys, "verify", "ks", "--pairs", "3", "--samples", "20000")
    assert code == EXIT_OK
    assert all(r["se"] > 0 for r in records(out))


def test_unknown_model_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify", "bogus"])
    assert info.value.code == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["verify", "bb", "--samples", "10"],
    ["verify", "bb", "--epsilon", "0.5"],
    ["verify", "bb", "--pairs", "0"],
    ["verify", "bb", "--seed", "-1"],
])
def test_bad_flags(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_USAGE and out == "" and "error" in err


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig(mc_samples=999)


@pytest.mark.parametrize("model,verdict", [("bell1", "deficient"), ("ks", "not-deficient")])
def test_analyze_deficiency(capsys, model, verdict):
    code, out, _ = run(capsys, "analyze", "deficiency", "--model", model)
    assert code == EXIT_OK
    assert records(out)[0]["verdict"] == verdict


def test_analyze_determinism_aerts(capsys):
    _, out, _ = run(capsys, "analyze", "determinism-class", "--model", "aerts")
    assert records(out)[0]["verdict"].lower() == "microdeterministic"


def test_analyze_all_models(capsys):
    _, out, _ = run(capsys, "analyze", "meas-contextuality")
    assert [r["model"] for r in records(out)] == ["bb", "ks", "bell1", "bell2", "aerts", "aaronson"]


def test_csv_and_text_formats(capsys):
    _, out, _ = run(capsys, "verify", "bb", "--pairs", "2", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 and rows[0]["verdict"] == "pass"
    _, out, _ = run(capsys, "verify", "bb", "--pairs", "2", "--format", "text")
    assert out.count("\n") == 2 and out.startswith("pass")


def test_ks_color_shipped(capsys, tmp_path):
    dest = tmp_path / "col.json"
    code, out, _ = run(capsys, "ks-color", "basis3", "--enumerate", "--coloring-out", str(dest))
    rec = records(out)[0]
    assert code == EXIT_OK and rec["verdict"] == "SAT" and rec["estimate"] == 3
    assert dest.exists()
    code, out, _ = run(capsys, "ks-color", "peres33")
    assert records(out)[0]["verdict"] == "UNSAT"


def test_ks_color_bad_file(capsys, tmp_path):
    bad = tmp_path / "bad.rays"
    bad.write_text("1 0 0\n1 x 0\n")
    code, _, err = run(capsys, "ks-color", str(bad))
    assert code == EXIT_USAGE and "line 2" in err
    code, _, _ = run(capsys, "ks-color", str(tmp_path / "missing.rays"))
    assert code == EXIT_USAGE


def test_rerun_is_byte_identical():
    cmd = [sys.executable, "-m", "ontic", "verify", "ks", "--pairs", "3", "--samples", "20000", "--seed", "9"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a


def test_exit_fail_constant():
    assert EXIT_FAIL == 1
