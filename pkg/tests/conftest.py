import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from src.henon_core import load_map_spec  # noqa: E402
from src.family_sweep import load_family_spec  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running box and sweep checks (deselect with -m \"not slow\")")


@pytest.fixture(scope="module")
def dissipative():
    """(y, y^2 + 1/2 - x/2)"""
    return load_map_spec(os.path.join(ROOT, "maps", "dissipative.json"))


@pytest.fixture(scope="module")
def conservative():
    """(y, y^2 - x)"""
    return load_map_spec(os.path.join(ROOT, "maps", "conservative.json"))


@pytest.fixture(scope="module")
def classical():
    """(y, y^2 - 1 - 3x/10)"""
    return load_map_spec(os.path.join(ROOT, "maps", "classical.json"))


@pytest.fixture(scope="module")
def intro_f():
    return load_family_spec(os.path.join(ROOT, "families", "intro_f.json"))


@pytest.fixture(scope="module")
def intro_g():
    return load_family_spec(os.path.join(ROOT, "families", "intro_g.json"))
