import math

import numpy as np
import pytest

from mtsbattle.errors import DomainError
from mtsbattle.physics.mathcore import (
    RandomStream,
    amplitude_db,
    circular_std,
    db,
    sample_complex_gaussian,
    undb,
    wrap_phase,
)


def test_same_key_replays_same_sequence():
    a = RandomStream(7, 3).rng.standard_normal(16)
    b = RandomStream(7, 3).rng.standard_normal(16)
    assert np.array_equal(a, b)


def test_distinct_stream_ids_differ():
    a = RandomStream(7, 0).rng.standard_normal(16)
    b = RandomStream(7, 1).rng.standard_normal(16)
    assert not np.array_equal(a, b)


def test_child_streams_are_label_keyed():
    root = RandomStream(11)
    x = root.child("beams", "A").rng.integers(0, 1 << 30, 8)
    y = RandomStream(11).child("beams", "A").rng.integers(0, 1 << 30, 8)
    z = root.child("beams", "B").rng.integers(0, 1 << 30, 8)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, z)


def test_db_round_trip_and_domain():
    assert db(100.0) == pytest.approx(20.0)
    assert undb(-30.0) == pytest.approx(1e-3)
    assert amplitude_db(10.0) == pytest.approx(20.0)
    with pytest.raises(DomainError):
        db(0.0)
    with pytest.raises(DomainError):
        amplitude_db(-1.0)


def test_wrap_phase_interval():
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert isinstance(wrap_phase(0.5), float)
    wrapped = wrap_phase(np.linspace(-10, 10, 101))
    assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)


def test_circular_std_limits():
    assert circular_std([0.3, 0.3, 0.3]) == pytest.approx(0.0, abs=1e-6)
    assert circular_std([0.0, math.pi]) == math.inf
    spread = circular_std([-0.1, 0.0, 0.1])
    assert 0.0 < spread < 0.1
    with pytest.raises(DomainError):
        circular_std([])


def test_complex_gaussian_variance():
    stream = RandomStream(5)
    assert isinstance(sample_complex_gaussian(stream, 1.0), complex)
    samples = sample_complex_gaussian(stream, 4.0, size=20000)
    assert samples.shape == (20000,)
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(4.0, rel=0.05)
    with pytest.raises(DomainError):
        sample_complex_gaussian(stream, -1.0)
