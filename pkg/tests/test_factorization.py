import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bm_erlang import lambda_pm
from factorization import (
    build_tables,
    cell_probabilities,
    conditional_inf_density,
    inf_density,
    joint_density,
    joint_density_grid,
    marginal_sup_from_joint,
    phase_at_end_distribution,
    phase_at_sup_distribution,
    sup_density,
    sup_tail,
    total_mass,
)
from fluid_embedding import JumpDiffusionModel
from ph_builders import random_alpha, random_model, random_ph
from ph_core import PhaseTypeRep, erlang, exponential, laplace, reverse_standard
from utils import DomainError, IndexOutOfRange, Reducible

st_seed = st.integers(0, 2 ** 32 - 1)


@pytest.fixture
def bm_exponential_tables(standard_bm, exp_horizon):
    return build_tables(standard_bm, exp_horizon)


@pytest.fixture
def jump_tables(jump_model, erlang3):
    return build_tables(jump_model, erlang3)


# ---------------------------------------------------------------------------
# Одна фаза: классическая факторизация
# ---------------------------------------------------------------------------

def test_one_phase_constants(bm_exponential_tables):
    lam_plus, lam_minus = lambda_pm(0.0, 1.0, 0.5)
    np.testing.assert_allclose(bm_exponential_tables.c, [1.0], atol=1e-14)
    assert bm_exponential_tables.r[0] == pytest.approx(lam_plus * lam_minus, rel=1e-12)


@pytest.mark.parametrize('x', [0.1, 1.0, 4.0])
def test_one_phase_densities(bm_exponential_tables, x):
    lam_plus, lam_minus = lambda_pm(0.0, 1.0, 0.5)
    assert sup_density(bm_exponential_tables, 0, x, 0) == pytest.approx(
        lam_plus * np.exp(-lam_plus * x), rel=1e-12)
    assert inf_density(bm_exponential_tables, 0, -x, 0) == pytest.approx(
        lam_minus * np.exp(-lam_minus * x), rel=1e-12)
    assert sup_tail(bm_exponential_tables, x) == pytest.approx(np.exp(-lam_plus * x), rel=1e-12)


@pytest.mark.parametrize('x, y', [(0.25, -2.0), (1.0, 0.0), (3.0, 1.5)])
def test_one_phase_product_form(x, y):
    model = JumpDiffusionModel(mu=0.4, sigma2=1.5)
    tables = build_tables(model, exponential(0.8))
    lam_plus, lam_minus = lambda_pm(0.4, 1.5, 0.8)
    expected = lam_plus * np.exp(-lam_plus * x) * lam_minus * np.exp(-lam_minus * (x - y))
    assert joint_density(tables, None, x, y, 0, 0) == pytest.approx(expected, rel=1e-10)

@pytest.mark.parametrize('x', [0.5, 3.586, 8.0])
def test_erlang_two_closed_form(standard_bm, erlang2, x):
    tables = build_tables(standard_bm, erlang2)
    root = np.sqrt(2.0)
    assert sup_density(tables, None, x, 1) == pytest.approx(x * np.exp(-root * x), rel=1e-10)
    assert sup_density(tables, None, x, 0) == pytest.approx(0.5 * root * np.exp(-root * x), rel=1e-10)
    # У обращённого Эрланга последняя стадия идёт первой
    assert inf_density(tables, None, -x, 0) == pytest.approx(x * np.exp(-root * x), rel=1e-10)



def test_one_phase_cells_exact(bm_exponential_tables):
    lam_plus, lam_minus = lambda_pm(0.0, 1.0, 0.5)
    x_edges, w_edges = np.array([0.0, 0.5, 2.0]), np.array([0.0, 1.0, 3.0])
    cells = cell_probabilities(bm_exponential_tables, x_edges, w_edges)
    px = -np.diff(np.exp(-lam_plus * x_edges))
    pw = -np.diff(np.exp(-lam_minus * w_edges))
    np.testing.assert_allclose(cells[:, :, 0, 0], np.outer(px, pw), atol=1e-13)


# ---------------------------------------------------------------------------
# Граничные значения и ошибки
# ---------------------------------------------------------------------------

def test_sup_density_at_zero_is_exit_rate(jump_tables):
    for k in range(3):
        assert sup_density(jump_tables, k, 1e-12, k) == pytest.approx(jump_tables.up.u[k], rel=1e-9)


def test_inf_density_at_zero(jump_tables):
    for k in range(3):
        assert inf_density(jump_tables, k, 0.0, k) == pytest.approx(jump_tables.down.u[k], rel=1e-14)


def test_joint_density_domain(jump_tables):
    with pytest.raises(DomainError):
        joint_density(jump_tables, None, 1.0, 1.0, 0, 0)
    with pytest.raises(DomainError):
        joint_density(jump_tables, None, 0.0, -1.0, 0, 0)
    with pytest.raises(DomainError):
        sup_density(jump_tables, None, -1.0, 0)
    with pytest.raises(DomainError):
        inf_density(jump_tables, None, 0.5, 0)


def test_index_out_of_range(jump_tables):
    with pytest.raises(IndexOutOfRange):
        sup_density(jump_tables, None, 1.0, jump_tables.up.r)
    with pytest.raises(IndexOutOfRange):
        joint_density(jump_tables, None, 1.0, 0.0, 0, 3)
    with pytest.raises(IndexOutOfRange):
        inf_density(jump_tables, 7, -1.0, 0)


def test_jump_phase_never_holds_supremum(jump_tables):
    assert joint_density(jump_tables, None, 1.0, 0.0, 3, 0) == 0.0
    np.testing.assert_allclose(jump_tables.c[3:], 0.0, atol=1e-10)


def test_general_reversal_needs_alpha_hat(standard_bm, erlang2):
    with pytest.raises(DomainError):
        build_tables(standard_bm, erlang2, reversal='general')


def test_stationary_reversal_of_erlang_fails(standard_bm, erlang2):
    with pytest.raises(Reducible):
        build_tables(standard_bm, erlang2, reversal='stationary')


def test_negative_delta(standard_bm, erlang2):
    with pytest.raises(DomainError):
        build_tables(standard_bm, erlang2, delta=-1.0)


# ---------------------------------------------------------------------------
# Тождества
# ---------------------------------------------------------------------------

def test_phase_laws(jump_tables, erlang3):
    assert phase_at_sup_distribution(jump_tables).sum() == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(phase_at_end_distribution(jump_tables),
                               reverse_standard(erlang3).alpha_star, atol=1e-14)


def test_factorization_identity(jump_tables):
    n = jump_tables.n
    for x in (0.3, 1.0, 2.5):
        for y in (-1.5, 0.0, 0.2):
            for k in range(n):
                for j in range(n):
                    lhs = joint_density(jump_tables, None, x, y, k, j)
                    rhs = (sup_density(jump_tables, None, x, k) * inf_density(jump_tables, j, y - x, k)
                           * jump_tables.alpha_star_ext[j] / jump_tables.c[k])
                    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize('x', [0.4, 1.7])
def test_marginalization(jump_tables, x):
    for k in range(jump_tables.n):
        assert marginal_sup_from_joint(jump_tables, None, x, k) == pytest.approx(
            sup_density(jump_tables, None, x, k), abs=1e-6)


def test_total_mass(jump_tables):
    assert total_mass(jump_tables, 'closed') == pytest.approx(1.0, abs=1e-6)
    assert total_mass(jump_tables, 'quadrature') == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize('delta', [0.05, 0.5])
def test_discounted_mass_is_laplace(jump_model, erlang3, delta):
    tables = build_tables(jump_model, erlang3, delta=delta)
    expected = laplace(erlang3, delta)
    assert total_mass(tables, 'closed') == pytest.approx(expected, abs=1e-6)
    assert total_mass(tables, 'quadrature') == pytest.approx(expected, abs=1e-6)


def test_zero_delta_is_undiscounted(jump_model, erlang3):
    a = build_tables(jump_model, erlang3)
    b = build_tables(jump_model, erlang3, delta=0.0)
    assert joint_density(a, None, 1.0, 0.3, 1, 2) == joint_density(b, None, 1.0, 0.3, 1, 2)


def test_cells_sum_to_one_on_wide_grid(jump_tables):
    cells = cell_probabilities(jump_tables, np.linspace(0.0, 60.0, 7), np.linspace(0.0, 60.0, 7))
    assert cells.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(cells >= -1e-15)


def test_density_grid_skips_invalid_points(jump_tables):
    rows = joint_density_grid(jump_tables, [-1.0, 0.5, 1.0], [0.0, 0.75])
    # (0.5, 0.0), (1.0, 0.0), (1.0, 0.75) по 9 пар фаз
    assert len(rows) == 3 * 9
    x, y, k, j, value = rows[-1]
    assert value == pytest.approx(joint_density(jump_tables, None, x, y, k, j), rel=1e-14)


@settings(max_examples=10, deadline=None)
@given(seed=st_seed, n=st.integers(1, 4), n_plus=st.integers(0, 2), n_minus=st.integers(0, 2))
def test_r_two_forms_agree(seed, n, n_plus, n_minus):
    tables = build_tables(random_model(seed, n_plus, n_minus), random_ph(seed, n))
    np.testing.assert_allclose(tables.r, tables.r_alt, rtol=1e-8)
    assert tables.c.sum() == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(seed=st_seed, n=st.integers(1, 4), n_plus=st.integers(0, 2), n_minus=st.integers(0, 2))
def test_reversal_invariance(seed, n, n_plus, n_minus):
    model, horizon = random_model(seed, n_plus, n_minus), random_ph(seed, n)
    first = build_tables(model, horizon, reversal='general', alpha_hat=random_alpha(seed, n))
    second = build_tables(model, horizon, reversal='general', alpha_hat=random_alpha(seed + 7, n))
    standard = build_tables(model, horizon)

    for y in np.linspace(-3.0, 0.0, 30):
        for k in range(n):
            try:
                a = conditional_inf_density(first, y, k)
                b = conditional_inf_density(second, y, k)
            except DomainError:
                continue
            assert a == pytest.approx(b, abs=1e-8)

    for x, y in ((0.5, -1.0), (1.5, 0.25)):
        for k in range(n):
            for j in range(n):
                value = joint_density(standard, None, x, y, k, j)
                assert joint_density(first, None, x, y, k, j) == pytest.approx(value, abs=1e-8)
