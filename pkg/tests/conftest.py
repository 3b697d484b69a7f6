import numpy as np
import pytest

from layerstack.backends import DispatchHandler, OracleBackend, generate_scene
from layerstack.backends.client import LocalTransport, ProtocolClient


def oracle_client(scene):
    """Protocol client over the in-process oracle for one scene."""
    return ProtocolClient(LocalTransport(DispatchHandler(OracleBackend(scene))))


@pytest.fixture
def scene():
    return generate_scene(3, instance_count=3, mutual_occlusion=True)


@pytest.fixture
def backend(scene):
    client = oracle_client(scene)
    yield client
    client.close()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
