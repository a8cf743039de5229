import filecmp
import json
import subprocess
import sys

import pytest

from graphamp.cli import main

from helpers import read_report_csv

TINY_LASSO = {
    "model": {"kind": "lasso", "d": 80, "aspect": 0.5, "lam": 1.2,
              "noise_sigma": 0.5},
    "T": 4,
    "amp_seeds": [0, 1],
    "quadrature": "gh",
}


def _write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_validate_config_reports_hash(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LASSO)
    assert main(["validate-config", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "config ok: kind=lasso T=4" in out
    assert "hash=" in out


def test_run_writes_schema_stamped_artifacts(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LASSO)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    msg = capsys.readouterr().out
    assert "comparisons" in msg and "outside gates" in msg
    for name in ("trajectory.csv", "se.csv", "compare.csv"):
        schema, rows = read_report_csv(out / name)
        assert schema.startswith("# schema=graphamp-v1 config_hash=")
        assert len(schema.split("config_hash=")[1].strip()) == 16
    _, rows = read_report_csv(out / "compare.csv")
    assert {r["name"] for r in rows} >= {"mse", "overlap"}
    assert all(r["pass"] in ("0", "1") for r in rows)


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, TINY_LASSO)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    for name in ("trajectory.csv", "se.csv", "compare.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_worker_pool_does_not_change_artifacts(tmp_path):
    cfg = _write(tmp_path, {**TINY_LASSO, "amp_seeds": [0, 1, 2]})
    a, b = tmp_path / "w1", tmp_path / "w3"
    assert main(["run", "--config", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--workers", "3"]) == 0
    for name in ("trajectory.csv", "se.csv", "compare.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_se_only_writes_predictions(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LASSO)
    out = tmp_path / "o"
    assert main(["se-only", "--config", cfg, "--out", str(out)]) == 0
    assert "se-only:" in capsys.readouterr().out
    _, rows = read_report_csv(out / "se.csv")
    assert {r["name"] for r in rows} == {"norm_sq_v", "norm_sq_u", "mse",
                                         "overlap"}


def test_embed_verify_passes_on_small_instance(tmp_path, capsys):
    cfg = _write(tmp_path, {**TINY_LASSO, "T": 3, "amp_seeds": [0]})
    out = tmp_path / "o"
    assert main(["embed-verify", "--config", cfg, "--out", str(out)]) == 0
    msg = capsys.readouterr().out
    assert "embed-verify: max discrepancy" in msg
    _, rows = read_report_csv(out / "embed.csv")
    assert all(float(r["err"]) <= 1e-10 for r in rows)


def test_bad_json_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"model": }')
    assert main(["run", "--config", str(p)]) == 2
    assert "config error:" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, {**TINY_LASSO, "bogus": 1})
    assert main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "bogus: unknown key" in err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "cannot read config" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_numerical_abort_exits_3_with_location(tmp_path, capsys):
    # beta0 = -1 zeroes the residual denominator on the first half-step
    cfg = _write(tmp_path, {
        "model": {"kind": "lasso", "d": 60, "aspect": 0.5, "lam": 1.0,
                  "beta0": -1.0},
        "T": 3,
    })
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "numerical abort" in err
    assert "edge obs->sig" in err and "step 0" in err


def test_unwritable_output_exits_4(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LASSO)
    assert main(["run", "--config", cfg, "--out", "/dev/null/o"]) == 4
    assert "io error:" in capsys.readouterr().err


def test_checks_subcommand_writes_suite_csv(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["checks", "--suite", "onsager", "--out", str(out)]) == 0
    assert "checks[onsager]: 20 checks, 0 failed" in capsys.readouterr().out
    _, rows = read_report_csv(out / "checks_onsager.csv")
    assert len(rows) == 20
    assert all(r["check_id"] == "onsager_fd" for r in rows)
    assert all(r["pass"] == "1" for r in rows)


def test_strict_turns_gate_failures_into_exit_1(tmp_path):
    # single seed, tight tolerances: finite-size offsets must trip gates
    cfg = _write(tmp_path, {**TINY_LASSO, "amp_seeds": [0],
                            "tolerances": {"rel": 1e-6, "z": 1e-6,
                                           "atol": 1e-12}})
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--strict"]) == 1
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0


def test_module_entry_point_runs(tmp_path):
    cfg = _write(tmp_path, {**TINY_LASSO, "T": 2, "amp_seeds": [0]})
    proc = subprocess.run(
        [sys.executable, "-m", "graphamp.cli", "run", "--config", cfg,
         "--out", str(tmp_path / "o")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "comparisons" in proc.stdout
