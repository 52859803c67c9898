import numpy as np
import pytest
from scipy import integrate, stats

from bm_erlang import (
    compute_weights,
    inf_density_erlang,
    joint_density_erlang,
    lambda_pm,
    phase_at_sup_erlang,
    sup_density_erlang,
)
from factorization import build_tables, inf_density, joint_density, sup_density
from fluid_embedding import JumpDiffusionModel
from ph_core import erlang
from utils import DomainError, IndexOutOfRange

PARAMS = [(0.0, 1.0, 1.0), (0.5, 1.0, 2.0), (-0.3, 2.0, 0.5)]


# ---------------------------------------------------------------------------
# Веса
# ---------------------------------------------------------------------------

def test_lambda_pm_values():
    lam_plus, lam_minus = lambda_pm(0.0, 1.0, 0.5)
    assert lam_plus == pytest.approx(1.0, rel=1e-15)
    assert lam_minus == pytest.approx(1.0, rel=1e-15)
    lam_plus, lam_minus = lambda_pm(1.0, 1.0, 1.5)
    # -1 ± sqrt(1 + 3)
    assert lam_plus == pytest.approx(1.0, rel=1e-15)
    assert lam_minus == pytest.approx(3.0, rel=1e-15)


@pytest.mark.parametrize('sigma2, rate', [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_lambda_pm_domain(sigma2, rate):
    with pytest.raises(DomainError):
        lambda_pm(0.0, sigma2, rate)


def test_base_weights():
    w = compute_weights(4, 1.0, 0.3, 1.2)
    assert w.p_bar[1, 1] == 1.0
    assert w.p_under[1, 1] == 1.0
    assert w.p_bar[2, 2] == pytest.approx(w.theta_plus, rel=1e-15)
    assert w.p_under[2, 2] == pytest.approx(w.theta_minus, rel=1e-15)
    np.testing.assert_array_equal(w.p_bar[1, 2:], 0.0)
    np.testing.assert_array_equal(w.p_under[1, 2:], 0.0)
    assert w.theta_plus + w.theta_minus == pytest.approx(1.0, abs=1e-15)


def test_weights_are_probabilities():
    w = compute_weights(8, 2.0, -0.7, 0.8)
    for table in (w.p_bar, w.p_under):
        assert np.all(table >= 0.0)
        assert np.all(table <= 1.0 + 1e-15)
    assert np.all(w.q_bar <= 1.0 + 1e-14)
    assert np.all(w.q_under <= 1.0 + 1e-14)


def test_zero_drift_is_symmetric():
    w = compute_weights(6, 1.0, 0.0, 1.0)
    assert w.theta_plus == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(w.p_bar, w.p_under, atol=1e-15)


@pytest.mark.parametrize('n', range(1, 11))
@pytest.mark.parametrize('mu, sigma2, rate', PARAMS)
def test_phase_law_sums_to_one(n, mu, sigma2, rate):
    law = phase_at_sup_erlang(compute_weights(n, rate, mu, sigma2))
    assert law.shape == (n,)
    assert np.all(law >= 0)
    assert law.sum() == pytest.approx(1.0, abs=1e-12)


def test_n_zero_rejected():
    with pytest.raises(DomainError):
        compute_weights(0, 1.0, 0.0, 1.0)


def test_weights_read_only():
    w = compute_weights(3, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        w.p_bar[1, 1] = 0.5


# ---------------------------------------------------------------------------
# Плотности
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('x', [0.1, 1.0, 3.0])
def test_single_stage_is_exponential(x):
    w = compute_weights(1, 0.5, 0.0, 1.0)
    assert sup_density_erlang(w, x, 1) == pytest.approx(np.exp(-x), rel=1e-12)
    assert inf_density_erlang(w, x, 1) == pytest.approx(np.exp(-x), rel=1e-12)


@pytest.mark.parametrize('x', [0.2, 1.0, 2.5])
def test_two_stages_last_stage(x):
    w = compute_weights(2, 1.0, 0.0, 1.0)
    expected = 0.5 * stats.erlang.pdf(x, 2, scale=1.0 / w.lam_plus)
    assert sup_density_erlang(w, x, 2) == pytest.approx(expected, rel=1e-12)


def test_zero_drift_inf_equals_sup():
    w = compute_weights(4, 1.5, 0.0, 2.0)
    for x in (0.3, 1.1, 4.0):
        for k in range(1, 5):
            assert inf_density_erlang(w, x, k) == pytest.approx(sup_density_erlang(w, x, k), rel=1e-13)


@pytest.mark.parametrize('mu, sigma2, rate', PARAMS)
def test_densities_integrate_to_one(mu, sigma2, rate):
    w = compute_weights(4, rate, mu, sigma2)
    sup_total = sum(integrate.quad(lambda x: sup_density_erlang(w, x, k), 0.0, np.inf)[0]
                    for k in range(1, 5))
    inf_total = sum(integrate.quad(lambda x: inf_density_erlang(w, x, k), 0.0, np.inf)[0]
                    for k in range(1, 5))
    assert sup_total == pytest.approx(1.0, abs=1e-8)
    assert inf_total == pytest.approx(1.0, abs=1e-8)


def test_joint_marginalizes_to_sup():
    w = compute_weights(3, 1.0, 0.4, 1.0)
    for k in range(1, 4):
        value, _ = integrate.quad(lambda y: joint_density_erlang(w, 1.2, y, k), 0.0, np.inf)
        assert value == pytest.approx(sup_density_erlang(w, 1.2, k), abs=1e-9)


def test_stage_out_of_range():
    w = compute_weights(3, 1.0, 0.0, 1.0)
    with pytest.raises(IndexOutOfRange):
        sup_density_erlang(w, 1.0, 0)
    with pytest.raises(IndexOutOfRange):
        inf_density_erlang(w, 1.0, 4)
    with pytest.raises(IndexOutOfRange):
        joint_density_erlang(w, 1.0, 1.0, 4)


def test_nonpositive_level_rejected():
    w = compute_weights(2, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        sup_density_erlang(w, 0.0, 1)
    with pytest.raises(DomainError):
        joint_density_erlang(w, 1.0, -0.5, 1)


# ---------------------------------------------------------------------------
# Сверка с матричным методом
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('n', range(1, 6))
@pytest.mark.parametrize('mu, sigma2, rate', PARAMS)
def test_agrees_with_matrix_method(n, mu, sigma2, rate):
    w = compute_weights(n, rate, mu, sigma2)
    tables = build_tables(JumpDiffusionModel(mu=mu, sigma2=sigma2), erlang(n, rate))

    np.testing.assert_allclose(phase_at_sup_erlang(w), tables.c, atol=1e-8)
    for x in np.linspace(0.05, 5.0, 50):
        for k in range(1, n + 1):
            assert sup_density(tables, None, x, k - 1) == pytest.approx(
                sup_density_erlang(w, x, k), abs=1e-8)
            # Обращённый Эрланг проходит фазы в обратном порядке
            assert inf_density(tables, None, -x, n - k) == pytest.approx(
                inf_density_erlang(w, x, k), abs=1e-8)


@pytest.mark.parametrize('n', [2, 4])
def test_joint_agrees_with_matrix_method(n):
    w = compute_weights(n, 1.0, 0.5, 1.0)
    tables = build_tables(JumpDiffusionModel(mu=0.5, sigma2=1.0), erlang(n, 1.0))
    for x in (0.5, 1.0, 2.5):
        for drawdown in (0.3, 1.0, 2.0):
            for k in range(1, n + 1):
                matrix = sum(joint_density(tables, None, x, x - drawdown, k - 1, j) for j in range(n))
                assert matrix == pytest.approx(joint_density_erlang(w, x, drawdown, k), abs=1e-8)
