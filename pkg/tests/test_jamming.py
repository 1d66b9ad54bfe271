import math

import numpy as np
import pytest

from conftest import make_model
from mtsbattle.battle.engine import PartySetup
from mtsbattle.battle.optimizers import ObjectiveSense, OptimizerKind
from mtsbattle.errors import DomainError
from mtsbattle.physics.mathcore import RandomStream
from mtsbattle.scenarios.jamming import JammingLink, ReceptionCurve, jamming_battle, jamming_sweep

GAINS = np.arange(-40.0, 62.0, 2.0)


def make_link(**kwargs):
    return JammingLink.calibrated(1.0 + 0j, make_model(seed=5), signal_power=1.0, noise_power=1e-3, **kwargs)


def test_calibrated_threshold_sits_below_clean_snr():
    link = make_link()
    assert link.clean_snr_db == pytest.approx(30.0)
    assert link.sjnr_threshold_db == pytest.approx(14.0)
    assert make_link(margin_db=10.0).sjnr_threshold_db == pytest.approx(20.0)


def test_link_validation():
    with pytest.raises(DomainError):
        JammingLink(1.0, make_model(), 1.0, 0.0, 10.0)
    with pytest.raises(DomainError):
        JammingLink.calibrated(0j, make_model(), 1.0, 1.0)


def test_sweep_is_monotone_and_spans_both_ends():
    curve = jamming_sweep(make_link(), GAINS, 200, RandomStream(1))
    assert np.all(np.diff(curve.rates) <= 0)
    assert curve.rates[0] >= 0.99
    assert curve.rates[-1] == 0.0
    assert np.all(curve.rates <= curve.raw + 1e-12)
    assert not math.isnan(curve.required_gain_db())
    with pytest.raises(DomainError):
        jamming_sweep(make_link(), GAINS, 0, RandomStream(1))


def test_required_gain_is_nan_when_reception_survives():
    curve = ReceptionCurve(gains_db=np.array([0.0, 1.0]), raw=np.array([1.0, 0.5]), rates=np.array([1.0, 0.5]))
    assert math.isnan(curve.required_gain_db())


def test_battle_phases_move_jamming_channel_as_intended():
    report = jamming_battle(
        make_link(),
        GAINS,
        100,
        RandomStream(2),
        attacker=PartySetup(kind=OptimizerKind.GD, sense=ObjectiveSense.MAXIMIZE),
        defender=PartySetup(kind=OptimizerKind.GD, sense=ObjectiveSense.MINIMIZE),
        steps=150,
    )
    baseline, attack, defense = report.phases
    assert abs(attack.h_eb) >= abs(baseline.h_eb)
    assert abs(defense.h_eb) <= abs(attack.h_eb)
    assert attack.cfg_a == baseline.cfg_a
    assert defense.cfg_b == attack.cfg_b
    assert not math.isnan(attack.required_gain_db) and not math.isnan(defense.required_gain_db)
    assert report.defense_margin_db >= 0
