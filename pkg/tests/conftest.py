"""
Shared fixtures for the toolkit tests
"""

import os
import sys
from pathlib import Path

import pytest

# Add project root to path for imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.services.dendrite import Dendrite
from src.services.dynamics import branch_rotation, identity_map, tent_map


@pytest.fixture(scope="session")
def models_dir() -> Path:
    return Path(project_root) / "src" / "models"


@pytest.fixture
def star3() -> Dendrite:
    """3-star with unit branches; edge i joins the hub 0 to vertex i + 1"""
    return Dendrite(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


@pytest.fixture
def unit_arc() -> Dendrite:
    return Dendrite(2, [(0, 1, 1.0)])


@pytest.fixture
def rotation():
    return branch_rotation(3)


@pytest.fixture
def tent():
    return tent_map()


@pytest.fixture
def identity(star3):
    return identity_map(star3)
