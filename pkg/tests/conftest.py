import os
from pathlib import Path

import pytest

from frobhodge import config
from frobhodge.catalog import e1_module, e1_potential, p1_p4_module, p1_p4_potential

DATA_DIR = Path(__file__).resolve().parent.parent / 'data'


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    for key in list(os.environ):
        if key.startswith('FROBHODGE_'):
            monkeypatch.delenv(key, raising=False)
    config.set_config(config.get_default_config())
    yield
    config.set_config(config.get_default_config())


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def e1():
    return e1_module()


@pytest.fixture
def e1_negative():
    return e1_module(kappa=-5)


@pytest.fixture
def e1_q(e1):
    return e1_potential({1: 1}, order=8, module=e1)


@pytest.fixture
def p1p4():
    return p1_p4_module()


@pytest.fixture
def p1p4_phi(p1p4):
    return p1_p4_potential(order=4, module=p1p4)


@pytest.fixture
def p1p4_perturbed(p1p4):
    return p1_p4_potential(order=4, perturbed=True, module=p1p4)
