import math

import numpy as np
import pytest

from mtsbattle.errors import ContractError, DomainError
from mtsbattle.physics.environment import (
    Geometry,
    MotionParams,
    MotionProcess,
    PropagationParams,
    SurfacePlacement,
    hop_coefficients,
    motion_step,
    path_amplitude,
    synthesize_coupling,
    synthesize_direct_channel,
    synthesize_subchannels,
    wavelength,
)
from mtsbattle.physics.mathcore import RandomStream


def test_wavelength_and_path_amplitude():
    assert wavelength(5.5e9) == pytest.approx(0.0545, rel=1e-3)
    lam = wavelength(5.5e9)
    near = path_amplitude(1.0, lam, 2.0)
    far = path_amplitude(2.0, lam, 2.0)
    assert near / far == pytest.approx(2.0)
    with pytest.raises(DomainError):
        path_amplitude(0.0, lam, 2.0)
    with pytest.raises(DomainError):
        wavelength(0.0)


def test_placement_positions_are_centred():
    placement = SurfacePlacement(center=np.array([0.0, 0.0, 1.0]), normal=np.array([1.0, 0.0, 0.0]), rows=4, cols=6)
    positions = placement.element_positions()
    assert positions.shape == (24, 3)
    assert np.allclose(positions.mean(axis=0), [0.0, 0.0, 1.0])
    assert np.allclose(positions @ placement.normal, 0.0)


def test_rotation_and_moves():
    placement = SurfacePlacement(center=np.array([2.0, 0.0, 0.0]), normal=np.array([-1.0, 0.0, 0.0]), rows=2, cols=2)
    turned = placement.rotated(math.pi / 2)
    assert np.allclose(turned.normal, [0.0, -1.0, 0.0])
    moved = placement.moved_to(np.zeros(3), 5.0)
    assert np.allclose(moved.center, [5.0, 0.0, 0.0])
    faced = placement.facing(np.array([2.0, 3.0, 0.0]))
    assert np.allclose(faced.normal, [0.0, 1.0, 0.0])


def test_geometry_rejects_coincident_endpoints():
    with pytest.raises(DomainError):
        Geometry(endpoints={"a": np.zeros(3), "b": np.zeros(3)})
    g = Geometry(endpoints={"a": np.zeros(3), "b": np.array([3.0, 4.0, 0.0])})
    assert g.distance("a", "b") == pytest.approx(5.0)
    with pytest.raises(ContractError):
        g.endpoint("c")


def test_param_ranges():
    with pytest.raises(DomainError):
        PropagationParams(path_loss_exponent=5.0)
    with pytest.raises(DomainError):
        MotionParams(ar_coefficient=1.0)
    with pytest.raises(DomainError):
        MotionParams(affected_fraction=1.5)


def test_infinite_k_is_deterministic(geometry):
    params = PropagationParams(rician_k=math.inf)
    one = synthesize_subchannels(geometry, params, "A", "alice", "bob", RandomStream(1))
    two = synthesize_subchannels(geometry, params, "A", "alice", "bob", RandomStream(2))
    assert np.allclose(one.h, two.h) and np.allclose(one.g, two.g)


def test_shared_hop_is_shared_between_links(geometry):
    params = PropagationParams()
    stream = RandomStream(4)
    to_bob = synthesize_subchannels(geometry, params, "A", "alice", "bob", stream)
    to_eve = synthesize_subchannels(geometry, params, "A", "alice", "eve", stream)
    assert np.array_equal(to_bob.h, to_eve.h)
    assert not np.array_equal(to_bob.g, to_eve.g)


def test_direct_attenuation_scales_amplitude(geometry):
    params = PropagationParams()
    plain = synthesize_direct_channel(geometry, params, "alice", "bob", RandomStream(3))
    weak = synthesize_direct_channel(geometry, params, "alice", "bob", RandomStream(3), attenuation_db=20.0)
    assert abs(weak.value) == pytest.approx(abs(plain.value) / 10.0)


def test_hop_obliquity_blocks_rear_side(geometry):
    placement = geometry.surfaces["A"]
    behind = placement.center + 2.0 * placement.normal * -1.0
    coeffs = hop_coefficients(placement, behind, geometry.wavelength, PropagationParams(), None)
    assert np.allclose(coeffs, 0.0)


def test_coupling_only_when_enabled(geometry):
    assert synthesize_coupling(geometry, PropagationParams()) is None
    t = synthesize_coupling(geometry, PropagationParams(coupling_enabled=True))
    assert t.shape == (16, 16)


def test_motion_process_is_reproducible():
    params = MotionParams(ar_coefficient=0.9, perturbation_std=0.05, affected_fraction=0.25)
    first = MotionProcess(params, (8, 4), RandomStream(6))
    second = MotionProcess(params, (8, 4), RandomStream(6))
    assert [s.size for s in first.affected] == [2, 1]
    for _ in range(5):
        a, b = first.step(), second.step()
        assert a.direct_factor == b.direct_factor
        assert np.array_equal(a.delta_a, b.delta_a)
    untouched = np.setdiff1d(np.arange(8), first.affected[0])
    assert np.all(a.delta_a[untouched] == 0)


def test_motion_step_without_perturbation_stays_static():
    params = MotionParams(ar_coefficient=0.9, perturbation_std=0.0)
    stream = RandomStream(1)
    m = 0j
    for _ in range(10):
        m = motion_step(m, params, stream)
    assert m == 0


@pytest.mark.slow
def test_motion_step_is_stationary_ar1():
    params = MotionParams(ar_coefficient=0.9, perturbation_std=0.3)
    stream = RandomStream(2)
    m = np.zeros(20_000, dtype=complex)
    for _ in range(200):
        m = motion_step(m, params, stream)
    following = motion_step(m, params, stream)

    power = float(np.mean(np.abs(m) ** 2))
    assert 0.085 <= power <= 0.095
    lag1 = float(np.real(np.mean(following * np.conj(m)))) / power
    assert lag1 == pytest.approx(0.9, abs=0.02)
