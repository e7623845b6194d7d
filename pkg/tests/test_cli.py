import json
from pathlib import Path

import pytest

from mimo_ee.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, cli_main
from mimo_ee.experiment import read_csv

EXAMPLE = Path(__file__).resolve().parent.parent / "configs" / "example.cfg"


def test_solve_prints_json(capsys):
    assert cli_main(["solve", "--config", str(EXAMPLE)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["powers_w"]) == 3
    assert doc["achieved_ee"] > 0


def test_solve_writes_out(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli_main(["solve", "--config", str(EXAMPLE), "--seed", "3", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["converged"] is True


def test_solve_infeasible_exits_one(tmp_path, capsys):
    cfg = tmp_path / "hard.cfg"
    cfg.write_text("num_users = 9\nmin_spectral_eff = 10\n")
    assert cli_main(["solve", "--config", str(cfg)]) == EXIT_FAIL
    assert "infeasible" in capsys.readouterr().err


def test_admit_prints_json(tmp_path, capsys):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("num_users = 9\nmin_spectral_eff = 6\n")
    assert cli_main(["admit", "--config", str(cfg), "--seed", "2"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert 0 <= doc["admitted_count"] <= 9


def test_sweep_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("sweep_variable = min_rate\nsweep_values = 1, 5\nnum_users = 6\n")
    out = tmp_path / "s.csv"
    assert cli_main(["sweep", "--config", str(cfg), "--trials", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r.num_trials for r in rows] == [3, 3]


def test_validate_seed_7(capsys):
    assert cli_main(["validate", "--seed", "7"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


@pytest.mark.parametrize("text", ["num_users = many\n", "colour = blue\n", "no equals sign\n"])
def test_malformed_config_exits_two(tmp_path, capsys, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert cli_main(["solve", "--config", str(cfg)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err and "line 1" in err


def test_missing_config_exits_two(tmp_path, capsys):
    assert cli_main(["sweep", "--config", str(tmp_path / "none.cfg")]) == EXIT_CONFIG


def test_bad_flags_exit_two(capsys):
    assert cli_main(["solve", "--trials", "zero"]) == EXIT_CONFIG
    assert cli_main(["sweep", "--trials", "0"]) == EXIT_CONFIG
    assert cli_main(["frobnicate"]) == EXIT_CONFIG


def test_help_exits_zero(capsys):
    assert cli_main(["--help"]) == EXIT_OK
