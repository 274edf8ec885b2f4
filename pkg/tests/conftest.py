import os

# sin archivos de log durante las pruebas
os.environ.setdefault("SCINC_LOG_TO_FILE", "false")
os.environ.setdefault("SCINC_LOG", "WARNING")

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: corridas de aceptación de varios segundos")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spd(rng):
    def make(p: int, cond: float = 10.0) -> np.ndarray:
        Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        eig = np.geomspace(1.0, cond, p)
        return (Q * eig) @ Q.T
    return make


def numeric_grad(fun, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(z)
    for i in range(z.shape[0]):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2.0 * h)
    return g


def numeric_jacobian(fun, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    cols = []
    for i in range(z.shape[0]):
        e = np.zeros_like(z)
        e[i] = h
        cols.append((fun(z + e) - fun(z - e)) / (2.0 * h))
    return np.column_stack(cols)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def fd_grad():
    return numeric_grad


@pytest.fixture
def fd_jacobian():
    return numeric_jacobian
