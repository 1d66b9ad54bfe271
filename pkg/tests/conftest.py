import numpy as np
import pytest

from mtsbattle.physics.channel import ChannelModel
from mtsbattle.physics.environment import Environment, Geometry, PropagationParams, SurfacePlacement
from mtsbattle.physics.mathcore import RandomStream, sample_complex_gaussian


def make_model(elements: int = 8, seed: int = 1, direct: complex = 0.2 + 0.1j, coupled: bool = False) -> ChannelModel:
    stream = RandomStream(seed)
    draw = lambda: sample_complex_gaussian(stream, 1.0, size=elements)  # noqa: E731
    coupling = 0.05 * sample_complex_gaussian(stream, 1.0, size=(elements, elements)) if coupled else None
    return ChannelModel.from_arrays(direct, draw(), draw(), draw(), draw(), coupling=coupling)


@pytest.fixture
def small_model() -> ChannelModel:
    return make_model()


@pytest.fixture
def geometry() -> Geometry:
    return Geometry(
        endpoints={
            "alice": np.array([0.0, 0.0, 0.0]),
            "bob": np.array([4.0, 0.0, 0.0]),
            "eve": np.array([2.0, -2.0, 0.0]),
        },
        surfaces={
            "A": SurfacePlacement(center=np.array([1.0, 1.5, 0.0]), normal=np.array([0.0, -1.0, 0.0]), rows=4, cols=4),
            "B": SurfacePlacement(center=np.array([3.0, 1.5, 0.0]), normal=np.array([0.0, -1.0, 0.0]), rows=4, cols=4),
        },
    )


@pytest.fixture
def environment(geometry: Geometry) -> Environment:
    return Environment(geometry, PropagationParams(rician_k=5.0))
