"""
Явные формулы для BM(mu, sigma2) на горизонте Эрланга: плотности супремума,
инфимума и совместная плотность как смеси распределений Эрланга

Стадии нумеруются с 1 (k = 1..n), как номера стадий Эрланга.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from utils import DomainError, IndexOutOfRange

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BmErlangWeights:
    """
    Веса смесей Эрланга

    Массивы p_bar[i, k], p_under[i, k] имеют форму (n+1, n+1) и заполнены
    при 1 <= i <= k <= n; q_bar[k], q_under[k] - длины n+1.
    """

    n: int
    rate: float
    mu: float
    sigma2: float
    lam_plus: float
    lam_minus: float
    theta_plus: float
    theta_minus: float
    p_bar: np.ndarray
    p_under: np.ndarray
    q_bar: np.ndarray
    q_under: np.ndarray


def lambda_pm(mu: float, sigma2: float, rate: float):
    """
    Показатели экспоненциальных законов X̄ и -X̲ на Exp(rate)-горизонте

    Returns:
        (λ₊, λ₋)
    """
    if not sigma2 > 0 or not rate > 0:
        raise DomainError(f"Нужны sigma2 > 0 и rate > 0, получено {sigma2!r}, {rate!r}")
    root = np.sqrt(mu ** 2 / sigma2 ** 2 + 2.0 * rate / sigma2)
    return float(-mu / sigma2 + root), float(mu / sigma2 + root)


def compute_weights(n: int, rate: float, mu: float, sigma2: float) -> BmErlangWeights:
    """
    Рекуррентное вычисление весов p̄(i;k), p̲(i;k)

    Args:
        n: Число стадий
        rate: Интенсивность каждой стадии
        mu: Снос
        sigma2: Дисперсия

    Returns:
        Таблицы весов
    """
    if n < 1:
        raise DomainError(f"n должно быть >= 1, получено {n!r}")
    lam_plus, lam_minus = lambda_pm(mu, sigma2, rate)
    theta_plus = lam_minus / (lam_plus + lam_minus)
    theta_minus = lam_plus / (lam_plus + lam_minus)

    p_bar = np.zeros((n + 1, n + 1))
    p_under = np.zeros((n + 1, n + 1))
    p_bar[1, 1] = p_under[1, 1] = 1.0

    powers_plus = theta_plus ** np.arange(n + 1)
    powers_minus = theta_minus ** np.arange(n + 1)

    for k in range(2, n + 1):
        # p(1;k) = 0 при k >= 2
        for i in range(2, k + 1):
            bar = under = 0.0
            for ell in range(i - 1, k):
                span = k - ell
                bar += p_bar[i - 1, ell] * np.dot(p_under[1:span + 1, span], powers_plus[1:span + 1])
                under += p_under[i - 1, ell] * np.dot(p_bar[1:span + 1, span], powers_minus[1:span + 1])
            p_bar[i, k] = bar
            p_under[i, k] = under

    q_bar = p_bar.sum(axis=0)
    q_under = p_under.sum(axis=0)
    logger.debug(f"Веса BM-Эрланг: n={n}, θ₊={theta_plus:.6g}, θ₋={theta_minus:.6g}")

    for array in (p_bar, p_under, q_bar, q_under):
        array.setflags(write=False)
    return BmErlangWeights(
        n=n, rate=float(rate), mu=float(mu), sigma2=float(sigma2),
        lam_plus=lam_plus, lam_minus=lam_minus,
        theta_plus=theta_plus, theta_minus=theta_minus,
        p_bar=p_bar, p_under=p_under, q_bar=q_bar, q_under=q_under,
    )


def _stage(w: BmErlangWeights, k: int) -> int:
    if not 1 <= k <= w.n:
        raise IndexOutOfRange(f"Стадия k={k} вне диапазона [1, {w.n}]")
    return int(k)


def _mixture(weights: np.ndarray, rate: float, x: float, k: int) -> float:
    """Σ_{i<=k} weights[i, k]·Erlang(i, rate)(x)"""
    shapes = np.arange(1, k + 1)
    densities = stats.erlang.pdf(x, shapes, scale=1.0 / rate)
    return float(np.dot(weights[1:k + 1, k], densities))


def sup_density_erlang(w: BmErlangWeights, x: float, k: int) -> float:
    """P(X̄_τ ∈ dx, J_σ̄ = k)/dx = q̲(n-k+1)·Σ_i p̄(i;k)·Erl(i, λ₊)(x)"""
    if not x > 0:
        raise DomainError(f"x должен быть положительным, получено {x!r}")
    k = _stage(w, k)
    return w.q_under[w.n - k + 1] * _mixture(w.p_bar, w.lam_plus, x, k)


def inf_density_erlang(w: BmErlangWeights, x: float, k: int) -> float:
    """P(-X̲_τ ∈ dx, J_σ̲ = k)/dx = q̄(n-k+1)·Σ_i p̲(i;k)·Erl(i, λ₋)(x)"""
    if not x > 0:
        raise DomainError(f"x должен быть положительным, получено {x!r}")
    k = _stage(w, k)
    return w.q_bar[w.n - k + 1] * _mixture(w.p_under, w.lam_minus, x, k)


def joint_density_erlang(w: BmErlangWeights, x: float, y: float, k: int) -> float:
    """
    Совместная плотность (X̄_τ ∈ dx, X̄_τ - X_τ ∈ dy, J_σ̄ = k)

    Args:
        w: Веса
        x: Уровень супремума, x > 0
        y: Отступ от супремума, y > 0
        k: Стадия на супремуме
    """
    if not (x > 0 and y > 0):
        raise DomainError(f"Нужны x > 0 и y > 0, получено x={x!r}, y={y!r}")
    k = _stage(w, k)
    return (_mixture(w.p_bar, w.lam_plus, x, k)
            * _mixture(w.p_under, w.lam_minus, y, w.n - k + 1))


def phase_at_sup_erlang(w: BmErlangWeights) -> np.ndarray:
    """Закон стадии на супремуме: элемент k-1 равен q̲(n-k+1)·q̄(k)"""
    k = np.arange(1, w.n + 1)
    return w.q_under[w.n - k + 1] * w.q_bar[k]
