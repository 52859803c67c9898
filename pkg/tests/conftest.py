"""
Общие фикстуры тестов
"""

import os
import sys

import pytest

# Модули лежат в корне репозитория
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fluid_embedding import JumpDiffusionModel
from ph_core import coxian, erlang, exponential


@pytest.fixture
def exp_horizon():
    return exponential(0.5)


@pytest.fixture
def erlang2():
    return erlang(2, 1.0)


@pytest.fixture
def erlang3():
    return erlang(3, 1.0)


@pytest.fixture
def coxian3():
    return coxian([1.0, 2.0, 3.0], [0.2, 0.5])


@pytest.fixture
def standard_bm():
    return JumpDiffusionModel(mu=0.0, sigma2=1.0)


@pytest.fixture
def jump_model():
    """BM(0, 1) с экспоненциальными скачками в обе стороны (n⁺ = n⁻ = 1)"""
    return JumpDiffusionModel(
        mu=0.0, sigma2=1.0,
        lam_plus=0.5, ph_plus=exponential(2.0),
        lam_minus=0.5, ph_minus=exponential(1.0),
    )
