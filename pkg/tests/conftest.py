import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from channels import cached_reconstruction, xwz_channel  # noqa: E402
from statevector import random_state  # noqa: E402


@pytest.fixture(scope='session')
def channel():
    return xwz_channel()


@pytest.fixture(scope='session')
def reconstruction():
    return cached_reconstruction()


@pytest.fixture
def inputs():
    def make(n_qubits, trials, seed=7):
        return [random_state(n_qubits, seed + t) for t in range(trials)]
    return make


@pytest.fixture(autouse=True)
def no_capacity_override(monkeypatch):
    monkeypatch.delenv('QTV_MAX_QUBITS', raising=False)
