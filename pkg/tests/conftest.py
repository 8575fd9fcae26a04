"""测试公共夹具"""
import os
import sys

import numpy as np
import pytest

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
SRC_PATH = os.path.join(PROJECT_ROOT, "src")
if SRC_PATH not in sys.path:
    sys.path.insert(0, SRC_PATH)

from DrewLab.domain.graph import Graph, build_graph  # noqa: E402

from tests.helpers import random_connected_graph  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def p4() -> Graph:
    """路径 0-1-2-3"""
    return build_graph([(0, 1), (1, 2), (2, 3)], 4)


@pytest.fixture
def c6() -> Graph:
    return build_graph([(i, (i + 1) % 6) for i in range(6)], 6)


@pytest.fixture
def two_c3() -> Graph:
    return build_graph([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)], 6)


@pytest.fixture
def graph8() -> Graph:
    """n=8 的随机连通图，用于有限差分检查"""
    return random_connected_graph(8, seed=7)
