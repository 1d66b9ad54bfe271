import math

import numpy as np
import pytest

from mtsbattle.errors import ContractError, DomainError, UnsupportedOperationError
from mtsbattle.physics.mathcore import RandomStream
from mtsbattle.physics.metasurface import (
    BINARY_STATES,
    MetasurfaceSpec,
    SurfaceConfig,
    check_config,
    initial_config,
    invert,
    mask_random_elements,
    random_config,
    random_configs,
    reflection_coefficients,
    with_active_count,
)


def test_binary_coefficients_are_exact_signs():
    spec = MetasurfaceSpec.binary(4)
    assert spec.phase_states == BINARY_STATES
    assert np.array_equal(spec.coefficient_table, np.array([1.0, -1.0], dtype=complex))
    coeffs = reflection_coefficients(spec, SurfaceConfig([0, 1, 1, 0]))
    assert np.array_equal(coeffs, np.array([1, -1, -1, 1], dtype=complex))


def test_grid_and_uniform_alphabets():
    spec = MetasurfaceSpec.grid(4, 4, phase_bits=2)
    assert spec.element_count == 16
    assert spec.n_states == 4
    assert spec.phase_states[1] == pytest.approx(math.pi / 2)
    assert MetasurfaceSpec.uniform(3, 2).is_binary
    assert MetasurfaceSpec.binary(10).free_space_size == 1024


def test_spec_validation():
    with pytest.raises(DomainError):
        MetasurfaceSpec(element_count=-1)
    with pytest.raises(DomainError):
        MetasurfaceSpec(element_count=2, phase_states=(0.0,))
    with pytest.raises(ContractError):
        MetasurfaceSpec(element_count=3, active_mask=[True, False])
    with pytest.raises(DomainError):
        MetasurfaceSpec(element_count=2, frozen_states=[0, 2])


def test_config_identity_and_hex():
    a = SurfaceConfig([1, 0, 1, 1, 0, 0, 0, 0, 1])
    b = SurfaceConfig(np.array([1, 0, 1, 1, 0, 0, 0, 0, 1]))
    assert a == b and hash(a) == hash(b)
    assert a.digest() == b.digest()
    assert SurfaceConfig.from_hex(a.hex(), len(a)) == a
    assert list(a.differing_positions(a.with_states([0], [0]))) == [0]
    with pytest.raises(UnsupportedOperationError):
        SurfaceConfig([0, 3]).hex()


def test_check_config_rejects_bad_configs():
    spec = MetasurfaceSpec(element_count=3, active_mask=[True, False, True], frozen_states=[0, 1, 0])
    check_config(spec, SurfaceConfig([1, 1, 0]))
    with pytest.raises(ContractError):
        check_config(spec, SurfaceConfig([1, 0, 0]))
    with pytest.raises(ContractError):
        check_config(spec, SurfaceConfig([0, 1]))
    with pytest.raises(ContractError):
        check_config(spec, SurfaceConfig([2, 1, 0]))


def test_initial_and_random_configs_respect_frozen_elements():
    spec = MetasurfaceSpec(element_count=4, active_mask=[True, False, True, False], frozen_states=[0, 1, 0, 1])
    assert list(initial_config(spec).state_indices) == [0, 1, 0, 1]
    stream = RandomStream(3)
    cfg = random_config(spec, stream)
    check_config(spec, cfg)
    batch = random_configs(spec, 50, stream)
    assert batch.shape == (50, 4)
    assert np.all(batch[:, 1] == 1) and np.all(batch[:, 3] == 1)


def test_invert_flips_only_active_elements():
    spec = MetasurfaceSpec(element_count=3, active_mask=[True, False, True], frozen_states=[0, 1, 0])
    flipped = invert(spec, SurfaceConfig([0, 1, 1]))
    assert list(flipped.state_indices) == [1, 1, 0]
    with pytest.raises(UnsupportedOperationError):
        invert(MetasurfaceSpec.uniform(3, 4), SurfaceConfig([0, 0, 0]))


def test_masking_counts():
    spec = MetasurfaceSpec.binary(64)
    masked = with_active_count(spec, 16, RandomStream(9))
    assert masked.active_count == 16
    assert masked.element_count == 64
    with pytest.raises(DomainError):
        mask_random_elements(spec, 65, RandomStream(9))
