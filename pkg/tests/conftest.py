import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def atom_line(serial, name, resname, chain, seq, xyz, record="ATOM  ", altloc=" "):
    name = name if len(name) >= 4 else f" {name:<3}"
    x, y, z = xyz
    return (f"{record}{serial:5d} {name:<4}{altloc}{resname:>3} {chain:1}{seq:4d}    "
            f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def anisotropic_cloud(rng, n, ratio=1.5):
    """Random cloud whose principal variances are well separated (each step >= ratio)."""
    scales = np.array([ratio ** 2 * 1.3, ratio * 1.15, 1.0]) * rng.uniform(6, 9)
    return rng.normal(size=(n, 3)) * scales
