import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ph_builders import random_alpha, random_ph
from ph_core import (
    PhaseTypeRep,
    cdf,
    coxian,
    erlang,
    exit_phase_distribution,
    exponential,
    laplace,
    moment,
    pdf,
    reverse_general,
    reverse_map,
    reverse_standard,
    reverse_stationary,
    validate,
)
from utils import DomainError, NotDistribution, NotSubGenerator, Reducible, Singular

st_seed = st.integers(0, 2 ** 32 - 1)
st_n = st.integers(1, 8)


def _positive(a):
    return np.asarray(a) > 1e-14


def _all_reps():
    reps = [erlang(n, 1.5) for n in range(1, 7)]
    reps += [coxian(np.linspace(1.0, 2.0, n), np.full(n - 1, 0.3)) for n in range(1, 7)]
    return reps


# ---------------------------------------------------------------------------
# Проверка представлений
# ---------------------------------------------------------------------------

def test_exit_vector_computed():
    rep = PhaseTypeRep([0.5, 0.5], [[-2.0, 1.0], [0.5, -1.5]])
    np.testing.assert_allclose(rep.t, [1.0, 1.0])
    assert rep.n == 2


def test_arrays_read_only():
    rep = exponential(1.0)
    with pytest.raises(ValueError):
        rep.T[0, 0] = -2.0


def test_alpha_must_sum_to_one():
    with pytest.raises(NotDistribution):
        validate(PhaseTypeRep([0.5, 0.4], [[-1.0, 1.0], [0.0, -1.0]]))


def test_negative_alpha():
    with pytest.raises(NotDistribution):
        validate(PhaseTypeRep([1.5, -0.5], [[-1.0, 1.0], [0.0, -1.0]]))


def test_positive_diagonal_rejected():
    with pytest.raises(NotSubGenerator):
        validate(PhaseTypeRep([1.0], [[1.0]]))


def test_negative_exit_rate_rejected():
    with pytest.raises(NotSubGenerator):
        validate(PhaseTypeRep([1.0, 0.0], [[-1.0, 2.0], [0.0, -1.0]]))


def test_shape_mismatch():
    with pytest.raises(NotSubGenerator):
        validate(PhaseTypeRep([1.0], [[-1.0, 1.0], [0.0, -1.0]]))


def test_reducible_when_phase_unreachable():
    # Из второй фазы Эрланга первая недостижима
    with pytest.raises(Reducible):
        validate(PhaseTypeRep([0.0, 1.0], [[-1.0, 1.0], [0.0, -1.0]]))


def test_nearly_singular_rejected():
    with pytest.raises(Singular):
        validate(PhaseTypeRep([1.0, 0.0], [[-1.0, 1.0], [1.0, -1.0 - 1e-13]]))


# ---------------------------------------------------------------------------
# Функции распределения
# ---------------------------------------------------------------------------

def test_exponential_cdf_pdf():
    rep = exponential(2.0)
    assert cdf(rep, 1.0) == pytest.approx(1.0 - np.exp(-2.0), abs=1e-14)
    assert pdf(rep, 1.0) == pytest.approx(2.0 * np.exp(-2.0), abs=1e-14)
    assert cdf(rep, 0.0) == 0.0


def test_erlang_matches_scipy():
    rep = erlang(4, 1.5)
    xs = np.linspace(0.0, 8.0, 33)
    np.testing.assert_allclose(cdf(rep, xs), stats.erlang.cdf(xs, 4, scale=1 / 1.5), atol=1e-12)
    np.testing.assert_allclose(pdf(rep, xs), stats.erlang.pdf(xs, 4, scale=1 / 1.5), atol=1e-12)


def test_cdf_shape_preserved():
    xs = np.linspace(0.0, 2.0, 6).reshape(2, 3)
    assert cdf(exponential(1.0), xs).shape == (2, 3)


def test_laplace_and_moments():
    rep = erlang(2, 1.0)
    assert laplace(rep, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert laplace(rep, 0.5) == pytest.approx((1.0 / 1.5) ** 2, abs=1e-14)
    assert rep.mean == pytest.approx(2.0)
    assert moment(rep, 2) == pytest.approx(6.0)

@settings(max_examples=30, deadline=None)
@given(seed=st_seed, n=st_n)
def test_laplace_strictly_decreasing(seed, n):
    rep = random_ph(seed, n)
    values = [laplace(rep, delta) for delta in (0.0, 0.1, 1.0, 10.0)]
    assert values[0] == pytest.approx(1.0, abs=1e-12)
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] > 0.0



def test_laplace_negative_delta():
    with pytest.raises(DomainError):
        laplace(exponential(1.0), -0.1)


def test_exit_phase_distribution_is_standard_alpha_star(coxian3):
    np.testing.assert_allclose(exit_phase_distribution(coxian3),
                               reverse_standard(coxian3).alpha_star, atol=1e-14)


# ---------------------------------------------------------------------------
# Обращение времени
# ---------------------------------------------------------------------------

def test_erlang_reversal_starts_in_last_phase(erlang2):
    result = reverse_standard(erlang2)
    np.testing.assert_allclose(result.alpha_star, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(result.T_star, [[-1.0, 0.0], [1.0, -1.0]], atol=1e-15)
    np.testing.assert_allclose(result.t_star, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize('n', range(2, 7))
def test_erlang_reversal_reverses_phase_order(n):
    result = reverse_standard(erlang(n, 2.0))
    expected = np.zeros(n)
    expected[-1] = 1.0
    np.testing.assert_allclose(result.alpha_star, expected, atol=1e-14)
    np.testing.assert_allclose(result.T_star, erlang(n, 2.0).T.T, atol=1e-13)


def test_coxian_reversal_alpha_star():
    p = np.array([0.2, 0.5, 0.3, 1.0])
    result = reverse_standard(coxian([1.0, 2.0, 3.0, 4.0], p[:-1]))
    expected = [p[i] * np.prod(1.0 - p[:i]) for i in range(4)]
    np.testing.assert_allclose(result.alpha_star, expected, atol=1e-12)


def test_general_reversal_of_erlang(erlang2):
    result = reverse_general(erlang2, [0.5, 0.5])
    np.testing.assert_allclose(result.alpha_star, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(result.t_star, [1.0, 0.5], atol=1e-14)
    np.testing.assert_allclose(result.alpha_hat, [0.5, 0.5])


def test_stationary_reversal_fails_on_erlang(erlang3):
    with pytest.raises(Reducible):
        reverse_stationary(erlang3)


def test_stationary_reversal_keeps_exit_vector():
    rep = PhaseTypeRep([0.6, 0.4], [[-2.0, 1.0], [0.5, -1.5]])
    result = reverse_stationary(rep)
    np.testing.assert_allclose(result.t_star, rep.t)
    np.testing.assert_allclose(result.alpha_star, result.alpha_hat)
    assert result.alpha_star.sum() == pytest.approx(1.0, abs=1e-14)

    xs = np.linspace(0.0, 5.0, 20)
    forward = PhaseTypeRep(result.alpha_hat, rep.T)
    np.testing.assert_allclose(cdf(result.as_rep(), xs), cdf(forward, xs), atol=1e-12)


def test_map_reversal_with_rank_one_d_is_standard(coxian3):
    D = np.outer(coxian3.t, coxian3.alpha)
    a, b = reverse_map(coxian3, D), reverse_standard(coxian3)
    np.testing.assert_allclose(a.alpha_star, b.alpha_star, atol=1e-13)
    np.testing.assert_allclose(a.T_star, b.T_star, atol=1e-13)


def test_map_reversal_rejects_bad_row_sums(coxian3):
    with pytest.raises(NotSubGenerator):
        reverse_map(coxian3, np.eye(3))


@pytest.mark.parametrize('rep', _all_reps())
def test_reversal_suite_structured(rep):
    once = reverse_standard(rep)
    twice = reverse_standard(once.as_rep())
    scale = max(1.0, float(np.max(np.abs(rep.T))))
    np.testing.assert_allclose(twice.alpha_star, rep.alpha, atol=1e-12, rtol=0)
    np.testing.assert_allclose(twice.T_star, rep.T, atol=1e-12 * scale, rtol=0)

    xs = np.linspace(0.0, 5.0 * rep.mean, 20)
    np.testing.assert_allclose(cdf(once.as_rep(), xs), cdf(rep, xs), atol=1e-10, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st_seed, n=st_n)
def test_reversal_involution(seed, n):
    rep = random_ph(seed, n)
    once = reverse_standard(rep)
    twice = reverse_standard(once.as_rep())
    scale = max(1.0, float(np.max(np.abs(rep.T))))
    np.testing.assert_allclose(twice.alpha_star, rep.alpha, atol=1e-12, rtol=0)
    np.testing.assert_allclose(twice.T_star, rep.T, atol=1e-12 * scale, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st_seed, n=st_n)
def test_reversal_preserves_cdf(seed, n):
    rep = random_ph(seed, n)
    reversed_rep = reverse_standard(rep).as_rep()
    xs = np.linspace(0.0, 5.0 * rep.mean, 20)
    np.testing.assert_allclose(cdf(reversed_rep, xs), cdf(rep, xs), atol=1e-10, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st_seed, n=st_n)
def test_reversal_sparsity_relations(seed, n):
    rep = random_ph(seed, n)
    result = reverse_standard(rep)
    assert np.array_equal(_positive(result.alpha_star), _positive(rep.t))
    assert np.array_equal(_positive(result.t_star), _positive(rep.alpha))
    assert np.array_equal(_positive(result.T_star), _positive(rep.T.T))


@settings(max_examples=25, deadline=None)
@given(seed=st_seed, n=st_n)
def test_general_reversal_preserves_cdf_of_alpha_hat(seed, n):
    rep = random_ph(seed, n)
    alpha_hat = random_alpha(seed, n)
    result = reverse_general(rep, alpha_hat)
    xs = np.linspace(0.0, 5.0 * rep.mean, 20)
    np.testing.assert_allclose(cdf(result.as_rep(), xs), cdf(PhaseTypeRep(alpha_hat, rep.T), xs),
                               atol=1e-10, rtol=0)
