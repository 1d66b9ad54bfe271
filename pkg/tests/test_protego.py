import math

import numpy as np
import pytest

from conftest import make_model
from mtsbattle.battle.optimizers import GreedyOptimizer, ObjectiveSense
from mtsbattle.errors import ContractError, DomainError, SearchFailedError
from mtsbattle.physics.channel import ChannelModel
from mtsbattle.physics.mathcore import RandomStream
from mtsbattle.physics.metasurface import SurfaceConfig
from mtsbattle.scenarios.protego import (
    ProtegoLinks,
    ProtegoSet,
    QpskFrame,
    protego_build_set,
    protego_counterattack,
    protego_transmission,
    protego_transmit,
    qpsk_decide,
    qpsk_modulate,
    symbol_error_rate,
)

# B's spins here sum to zero, so Eve sees only A's two steering elements
NEUTRAL_B = SurfaceConfig([0, 0, 1, 1])


def steerable_links() -> ProtegoLinks:
    """Bob hears elements 0-7 of A; Eve hears only elements 8 and 9, plus a strong surface B."""
    bob_a = np.zeros(16, dtype=complex)
    bob_a[:8] = 0.3 * np.exp(1j * np.arange(8))
    eve_a = np.zeros(16, dtype=complex)
    eve_a[8], eve_a[9] = 1.0, 1j
    ones_a, ones_b = np.ones(16), np.ones(4)
    bob = ChannelModel.from_arrays(1.0, bob_a, ones_a, np.zeros(4), ones_b)
    eve = ChannelModel.from_arrays(0.0, eve_a, ones_a, np.full(4, 5.0), ones_b)
    return ProtegoLinks(bob=bob, eve=eve)


def test_qpsk_round_trip():
    symbols = np.arange(4)
    assert list(qpsk_decide(qpsk_modulate(symbols))) == [0, 1, 2, 3]
    assert np.allclose(np.abs(qpsk_modulate(symbols)), 1.0)


def test_frame_validation():
    with pytest.raises(ContractError):
        QpskFrame(np.array([0, 1]), np.array([1.0]))
    with pytest.raises(DomainError):
        QpskFrame(np.array([0, 4]), np.ones(2))


def test_constant_channel_has_no_errors():
    symbols = RandomStream(1).rng.integers(0, 4, 500)
    frame = QpskFrame(symbols, np.full(500, 0.3 * np.exp(2.0j)))
    assert symbol_error_rate(frame) == 0.0
    assert symbol_error_rate(QpskFrame([2], [1.0])) == 0.0


def test_quadrant_hopping_reduces_to_guessing():
    stream = RandomStream(2)
    symbols = stream.rng.integers(0, 4, 10000)
    members = stream.rng.integers(0, 4, 10000)
    ser = protego_transmit(symbols, np.ones(10000), np.exp(1j * (math.pi / 2) * members))
    assert ser.ser_bob == 0.0
    assert ser.ser_eve == pytest.approx(0.75, abs=0.03)
    with pytest.raises(ContractError):
        symbol_error_rate(QpskFrame(symbols, np.ones(10000)), noise_variance=0.1)


def test_set_properties():
    pset = ProtegoSet(
        configs=[SurfaceConfig([0]), SurfaceConfig([1])],
        cfg_b=SurfaceConfig([]),
        bob=np.array([1.0, 1.1 * np.exp(0.1j)]),
        eve=np.array([np.exp(0.5j), np.exp(2.0j)]),
    )
    assert pset.bob_power_spread_db == pytest.approx(20 * math.log10(1.1))
    assert pset.bob_phase_spread == pytest.approx(0.1)
    assert list(pset.eve_quadrants) == [0, 1]


def test_build_set_steers_eve_through_every_quadrant():
    links = steerable_links()
    pset = protego_build_set(links, NEUTRAL_B, RandomStream(3), set_size=4, bob_steps=200, search_steps=400)
    assert len(pset) == 4
    assert sorted(pset.eve_quadrants) == [0, 1, 2, 3]
    assert pset.bob_power_spread_db < 1.0
    assert pset.bob_phase_spread < 0.5


def test_build_set_reports_unreachable_sectors():
    model = make_model(seed=4)
    with pytest.raises(SearchFailedError) as info:
        protego_build_set(ProtegoLinks(bob=model, eve=model), SurfaceConfig([0] * 8), RandomStream(5), 4, 50, 50)
    assert all(key.startswith("sector_") for key in info.value.diagnostics)
    assert len(info.value.diagnostics) >= 3


def test_single_member_set_is_bob_optimum():
    links = steerable_links()
    pset = protego_build_set(links, NEUTRAL_B, RandomStream(3), set_size=1, bob_steps=50)
    assert len(pset) == 1 and pset.bob.shape == (1,)
    with pytest.raises(DomainError):
        protego_build_set(links, NEUTRAL_B, RandomStream(3), set_size=0)


def test_transmission_draws_members():
    links = steerable_links()
    pset = protego_build_set(links, NEUTRAL_B, RandomStream(3), set_size=4, bob_steps=200, search_steps=400)
    tx = protego_transmission(links, pset, NEUTRAL_B, 4000, RandomStream(6))
    assert set(np.unique(tx.members)) == {0, 1, 2, 3}
    ser = tx.ser()
    assert ser.ser_bob == 0.0
    assert ser.ser_eve > 0.6
    with pytest.raises(DomainError):
        protego_transmission(links, pset, NEUTRAL_B, 0, RandomStream(6))


def test_counterattack_pins_eve_phase():
    links = steerable_links()
    pset = protego_build_set(links, NEUTRAL_B, RandomStream(3), set_size=4, bob_steps=200, search_steps=400)
    eve_opt = GreedyOptimizer(links.eve.spec_b, ObjectiveSense.MINIMIZE, NEUTRAL_B)
    result = protego_counterattack(links, pset, eve_opt, RandomStream(7), steps=100, n_symbols=4000)
    assert result.before.ser_eve > 0.6
    assert result.after.ser_eve < 0.05
    assert result.after.ser_bob == 0.0
    assert result.eve_phase_std < 0.2
    assert result.config_b != NEUTRAL_B
