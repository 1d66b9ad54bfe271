import json

import pytest

from mtsbattle.__main__ import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, cli
from mtsbattle.results import ResultManifest

from test_orchestrator import SMALL_BATTLE


@pytest.fixture
def experiment_file(tmp_path, monkeypatch):
    # the registry path from config.yaml is relative to the working directory
    monkeypatch.chdir(tmp_path)
    path = tmp_path / "battle.yaml"
    path.write_text(SMALL_BATTLE)
    return path


def test_list_text(capsys):
    assert cli(["list"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 12
    assert lines[0].split()[:2] == ["battle", "#battle-timing-modes"]


def test_list_json(capsys):
    assert cli(["list", "--format", "json"]) == EXIT_OK
    kinds = json.loads(capsys.readouterr().out)
    assert {k["kind"] for k in kinds} >= {"battle", "jamming", "protego", "irshield", "risiren"}
    assert all(k["anchor"].startswith("#") and k["description"] for k in kinds)


def test_validate_ok(experiment_file, capsys):
    assert cli(["validate", "--config", str(experiment_file)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == "ok"


def test_validate_reports_every_problem(experiment_file, capsys):
    experiment_file.write_text(SMALL_BATTLE.replace("seed: 11", "seed: -1") + "extra: 1\n")
    assert cli(["validate", "--config", str(experiment_file)]) == EXIT_CONFIG
    err = capsys.readouterr().err.splitlines()
    assert len(err) == 2
    assert all(line.startswith(f"{experiment_file}: line ") for line in err)


def test_run_writes_output(experiment_file, tmp_path):
    out = tmp_path / "results"
    assert cli(["run", "--config", str(experiment_file), "--out", str(out), "--seed", "4"]) == EXIT_OK

    manifest = ResultManifest.read(out)
    assert manifest.seed == 4
    assert manifest.kind == "battle"
    assert (tmp_path / "data" / "runs.db").exists()


def test_run_with_bad_config(experiment_file, tmp_path):
    experiment_file.write_text("kind: nonsense\n")
    assert cli(["run", "--config", str(experiment_file), "--out", str(tmp_path / "r")]) == EXIT_CONFIG


def test_run_failure_exit_code(experiment_file, tmp_path):
    (tmp_path / "blocked").write_text("")
    out = tmp_path / "blocked" / "out"
    assert cli(["run", "--config", str(experiment_file), "--out", str(out)]) == EXIT_RUNTIME
