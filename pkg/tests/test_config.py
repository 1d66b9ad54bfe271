import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from mtsbattle.config import ExperimentConfig, GainGrid, load_experiment, parse_quantity, parse_vector
from mtsbattle.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
kind: battle
seed: 3
geometry:
  endpoints:
    alice: "0, 0, 0 m"
    bob: "4, 0, 0 m"
"""


def write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(text)
    return path


def diagnostics(tmp_path: Path, text: str):
    with pytest.raises(ConfigError) as info:
        load_experiment(write(tmp_path, text))
    return info.value.diagnostics


# ── quantities ──


@pytest.mark.parametrize(
    "text, kind, expected",
    [
        ("5.5 GHz", "frequency", 5.5e9),
        ("100 Hz", "frequency", 100.0),
        ("30 cm", "length", 0.3),
        ("120 mm", "length", 0.12),
        ("-90 dB", "level", -90.0),
        ("0.5 rad", "angle", 0.5),
        ("30 deg", "angle", math.pi / 6),
    ],
)
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected)


@pytest.mark.parametrize("value", [5, 5.0, True, "5", "5 furlong", "GHz"])
def test_parse_quantity_needs_a_known_unit(value):
    with pytest.raises(ValueError):
        parse_quantity(value, "frequency")


def test_parse_vector():
    assert parse_vector("1, 2, 0.5 m") == pytest.approx((1.0, 2.0, 0.5))
    assert parse_vector("100, 0, -50 cm") == pytest.approx((1.0, 0.0, -0.5))


@pytest.mark.parametrize("value", ["1, 2 m", "1, 2, 3", "1, x, 3 m", [1, 2, 3]])
def test_parse_vector_rejects(value):
    with pytest.raises(ValueError):
        parse_vector(value)


def test_gain_grid():
    grid = GainGrid(start="-40 dB", stop="60 dB", step="2 dB").grid()
    assert len(grid) == 51
    assert grid[0] == -40.0
    assert grid[-1] == pytest.approx(60.0)

    with pytest.raises(ValidationError):
        GainGrid(start="0 dB", stop="10 dB", step="0 dB")


# ── shipped experiment files ──


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    config = load_experiment(path)
    assert config.kind == path.stem


def test_seed_override_changes_digest():
    base = load_experiment(CONFIGS / "battle.yaml")
    again = load_experiment(CONFIGS / "battle.yaml")
    other = load_experiment(CONFIGS / "battle.yaml", seed=99)

    assert other.seed == 99
    assert base.digest() == again.digest()
    assert len(base.digest()) == 64
    assert base.digest() != other.digest()


def test_party_defaults(tmp_path):
    config = load_experiment(write(tmp_path, MINIMAL))
    assert config.party("A").sense == "maximize"
    assert config.party("B").sense == "minimize"
    assert config.party("A").optimizer == "GD"
    assert config.geometry.frequency == pytest.approx(5.5e9)


# ── diagnostics ──


def test_unknown_key_reported_with_line(tmp_path):
    diags = diagnostics(tmp_path, MINIMAL + "colour: red\n")
    assert len(diags) == 1
    assert diags[0].location == "colour"
    assert diags[0].message == "Extra inputs are not permitted"
    assert diags[0].line == 7


def test_nested_error_points_at_its_line(tmp_path):
    text = MINIMAL + "parties:\n  A:\n    pause: 0\n"
    diags = diagnostics(tmp_path, text)
    assert [d.location for d in diags] == ["parties.A.pause"]
    assert diags[0].line == 9
    assert "greater than or equal to 1" in diags[0].message


def test_all_problems_reported_at_once(tmp_path):
    text = MINIMAL.replace("seed: 3\n", "") + "schedule:\n  total_steps: 0\n"
    locations = {d.location for d in diagnostics(tmp_path, text)}
    assert {"seed", "schedule.total_steps"} <= locations


def test_bare_number_rejected(tmp_path):
    text = MINIMAL.replace("geometry:\n", "geometry:\n  frequency: 5500000000\n")
    diags = diagnostics(tmp_path, text)
    assert diags[0].location == "geometry.frequency"
    assert "unit" in diags[0].message


def test_kind_requires_its_section(tmp_path):
    diags = diagnostics(tmp_path, MINIMAL.replace("kind: battle", "kind: algorithm_matrix"))
    assert diags[0].location == "<root>"
    assert "experiment kind 'algorithm_matrix' requires sweep.kinds" in diags[0].message


def test_risiren_needs_target(tmp_path):
    text = MINIMAL.replace("kind: battle", "kind: risiren") + "risiren:\n  toggle_steps: 10\n"
    diags = diagnostics(tmp_path, text)
    assert [d.location for d in diags] == ["risiren.target"]


def test_unknown_endpoint(tmp_path):
    text = MINIMAL + "surfaces:\n  A:\n    anchor: carol\n    offset: \"0, 1, 0 m\"\n"
    diags = diagnostics(tmp_path, text)
    assert "surfaces.A refers to unknown endpoint 'carol'" in diags[0].message


def test_link_must_be_defined(tmp_path):
    text = MINIMAL.replace('    bob: "4, 0, 0 m"\n', '    eve: "4, 0, 0 m"\n')
    diags = diagnostics(tmp_path, text)
    assert diags[0].location == "geometry"
    assert "bob" in diags[0].message


def test_unknown_evaluation(tmp_path):
    text = MINIMAL + "parties:\n  A:\n    evaluation: loudness\n"
    diags = diagnostics(tmp_path, text)
    assert diags[0].location == "parties.A.evaluation"
    assert "unknown evaluation 'loudness'" in diags[0].message


def test_invalid_yaml(tmp_path):
    diags = diagnostics(tmp_path, "kind: battle\ngeometry: [alice\n")
    assert diags[0].message.startswith("invalid YAML")
    assert diags[0].line is not None


def test_non_mapping_file(tmp_path):
    diags = diagnostics(tmp_path, "- battle\n- 3\n")
    assert diags[0].message == "experiment file must be a mapping"


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_experiment(tmp_path / "missing.yaml")
    assert "cannot read file" in info.value.diagnostics[0].message
    assert "missing.yaml" in str(info.value)


def test_config_is_frozen(tmp_path):
    config = load_experiment(write(tmp_path, MINIMAL))
    with pytest.raises(ValidationError):
        config.seed = 4
    assert isinstance(config, ExperimentConfig)
