import numpy as np
import pytest

from morphwing.config import Config
from morphwing.linkage import LinkageTopology


@pytest.fixture(scope="session")
def cfg():
    return Config.default()


@pytest.fixture(scope="session")
def topo(cfg):
    return LinkageTopology.from_config(cfg)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(cfg):
    """Touch the jitted episode loop once so compile time is paid up front
    (cached across processes afterward)."""
    from morphwing import engine
    engine.run_episode(cfg, duration=2e-3)


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def random_rotation(rng):
    return rot_z(rng.uniform(-np.pi, np.pi)) @ rot_y(rng.uniform(-1.2, 1.2)) \
        @ rot_x(rng.uniform(-np.pi, np.pi))
