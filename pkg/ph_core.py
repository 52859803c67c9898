"""
Фазовые (PH) распределения: представления, проверка, функции распределения
и три конструкции обращения времени
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Union

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from utils import DomainError, NotDistribution, NotSubGenerator, Reducible, Singular

logger = logging.getLogger(__name__)

# Порог нуля для структуры разреженности и графа смежности
ZERO_TOL = 1e-14
# Допуск на сумму начального вектора
ALPHA_SUM_TOL = 1e-12
# Предельное число обусловленности T
COND_LIMIT = 1e12

ArrayLike = Union[float, np.ndarray]


def _frozen(array) -> np.ndarray:
    """Копия массива только для чтения"""
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhaseTypeRep:
    """PH-представление (alpha, T); вектор выхода t = -T·1 вычисляется"""

    alpha: np.ndarray
    T: np.ndarray
    t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alpha = np.atleast_1d(np.array(self.alpha, dtype=float))
        T = np.atleast_2d(np.array(self.T, dtype=float))
        t = -T.sum(axis=1) if T.ndim == 2 else np.zeros(0)
        # Остатки округления в строках с нулевой суммой -> точный ноль
        scale = max(1.0, float(np.max(np.abs(T)))) if T.size else 1.0
        t[np.abs(t) < ZERO_TOL * scale] = 0.0
        object.__setattr__(self, 'alpha', _frozen(alpha))
        object.__setattr__(self, 'T', _frozen(T))
        object.__setattr__(self, 't', _frozen(t))

    @property
    def n(self) -> int:
        """Число фаз"""
        return self.T.shape[0]

    @property
    def mean(self) -> float:
        """Среднее E τ = α(-T)⁻¹1"""
        return moment(self, 1)


@dataclass(frozen=True)
class ReversalResult:
    """Обращённое во времени представление (alpha*, T*) и вектор ν"""

    alpha_star: np.ndarray
    T_star: np.ndarray
    t_star: np.ndarray
    nu: np.ndarray
    alpha_hat: np.ndarray  # начальный вектор, по которому строилось обращение

    def as_rep(self) -> PhaseTypeRep:
        """Обращённое представление как PhaseTypeRep"""
        return PhaseTypeRep(self.alpha_star, self.T_star)


# ---------------------------------------------------------------------------
# Конструкторы
# ---------------------------------------------------------------------------

def exponential(rate: float) -> PhaseTypeRep:
    """Экспоненциальное распределение с интенсивностью rate"""
    return PhaseTypeRep([1.0], [[-float(rate)]])


def erlang(n: int, rate: float) -> PhaseTypeRep:
    """
    Распределение Эрланга

    Args:
        n: Число стадий
        rate: Интенсивность каждой стадии

    Returns:
        Представление с alpha = e_1 и двухдиагональной T
    """
    if n < 1:
        raise NotSubGenerator("Число стадий Эрланга должно быть не меньше 1")
    T = -rate * np.eye(n) + rate * np.eye(n, k=1)
    alpha = np.zeros(n)
    alpha[0] = 1.0
    return PhaseTypeRep(alpha, T)


def coxian(rates, exit_probs, alpha: Optional[np.ndarray] = None) -> PhaseTypeRep:
    """
    Обобщённое распределение Кокса

    T_ii = -λ_i, T_{i,i+1} = λ_i(1 - p_i); в последней фазе p_n = 1.

    Args:
        rates: Интенсивности λ_1..λ_n
        exit_probs: Вероятности выхода p_1..p_{n-1} (p_n = 1 подставляется)
        alpha: Начальный вектор (по умолчанию e_1)
    """
    rates = np.asarray(rates, dtype=float)
    n = rates.size
    p = np.ones(n)
    p[:n - 1] = np.asarray(exit_probs, dtype=float)[:n - 1]
    T = np.diag(-rates)
    for i in range(n - 1):
        T[i, i + 1] = rates[i] * (1.0 - p[i])
    if alpha is None:
        alpha = np.zeros(n)
        alpha[0] = 1.0
    return PhaseTypeRep(alpha, T)


# ---------------------------------------------------------------------------
# Проверка
# ---------------------------------------------------------------------------

def _strongly_connected(adjacency: np.ndarray) -> bool:
    """Сильная связность ориентированного графа с рёбрами adjacency > ZERO_TOL"""
    if adjacency.shape[0] == 1:
        return True
    graph = (adjacency > ZERO_TOL).astype(float)
    np.fill_diagonal(graph, 0.0)
    count, _ = connected_components(graph, directed=True, connection='strong')
    return count == 1


def is_irreducible(T: np.ndarray, t: np.ndarray, alpha: np.ndarray) -> bool:
    """Проверка неразложимости T + t·alpha"""
    return _strongly_connected(T + np.outer(t, alpha))


def _check_shapes(alpha: np.ndarray, T: np.ndarray):
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise NotSubGenerator(f"T должна быть квадратной, получено {T.shape}")
    if alpha.ndim != 1 or alpha.size != T.shape[0]:
        raise NotSubGenerator(
            f"Длина alpha ({alpha.size}) не совпадает с размером T ({T.shape[0]})"
        )


def _check_alpha(alpha: np.ndarray, name: str = 'alpha'):
    if np.any(alpha < 0):
        raise NotDistribution(f"{name} содержит отрицательные элементы")
    if abs(alpha.sum() - 1.0) > ALPHA_SUM_TOL:
        raise NotDistribution(f"Сумма {name} равна {alpha.sum()!r}, ожидается 1")


def _check_sub_generator(T: np.ndarray, t: np.ndarray):
    off = T - np.diag(np.diag(T))
    if np.any(off < 0):
        raise NotSubGenerator("Внедиагональные элементы T должны быть неотрицательны")
    if np.any(np.diag(T) >= 0):
        raise NotSubGenerator("Диагональные элементы T должны быть отрицательны")
    if np.any(t < 0):
        raise NotSubGenerator("Суммы строк T должны быть неположительны")


def _check_regular(T: np.ndarray):
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise Singular(f"T численно вырождена (обусловленность {cond:.3e})")


def validate(rep: PhaseTypeRep) -> PhaseTypeRep:
    """
    Проверка PH-представления

    Args:
        rep: Представление

    Returns:
        То же представление (с вычисленным t), если все инварианты выполнены
    """
    _check_shapes(rep.alpha, rep.T)
    _check_alpha(rep.alpha)
    _check_sub_generator(rep.T, rep.t)
    _check_regular(rep.T)
    if not is_irreducible(rep.T, rep.t, rep.alpha):
        raise Reducible("T + t·alpha не является неразложимой")
    return rep


# ---------------------------------------------------------------------------
# Функции распределения
# ---------------------------------------------------------------------------

_BATCH = 65536


def _expm_rows(rep: PhaseTypeRep, x: ArrayLike, right: np.ndarray):
    """
    Значения α·exp(Tx)·right для скаляра или массива x (x < 0 -> nan)

    Матричные экспоненты считаются пакетами: scipy.linalg.expm
    принимает стопку матриц формы (k, n, n).
    """
    values = np.asarray(x, dtype=float)
    flat = values.ravel()
    out = np.full(flat.shape, np.nan)
    for start in range(0, flat.size, _BATCH):
        chunk = flat[start:start + _BATCH]
        ok = chunk >= 0
        if not np.any(ok):
            continue
        stack = linalg.expm(rep.T[np.newaxis, :, :] * chunk[ok, np.newaxis, np.newaxis])
        part = np.full(chunk.shape, np.nan)
        part[ok] = np.einsum('i,kij,j->k', rep.alpha, stack, right)
        out[start:start + _BATCH] = part
    out = out.reshape(values.shape)
    return float(out) if out.ndim == 0 else out


def cdf(rep: PhaseTypeRep, x: ArrayLike) -> ArrayLike:
    """
    Функция распределения 1 - α·exp(Tx)·1

    Args:
        rep: Представление
        x: Точка (или массив точек), x >= 0

    Returns:
        Вероятность (или массив)
    """
    survival = _expm_rows(rep, np.maximum(x, 0.0), np.ones(rep.n))
    return np.clip(1.0 - survival, 0.0, 1.0)


def pdf(rep: PhaseTypeRep, x: ArrayLike) -> ArrayLike:
    """Плотность α·exp(Tx)·t"""
    density = _expm_rows(rep, x, rep.t)
    return np.nan_to_num(density, nan=0.0)


def laplace(rep: PhaseTypeRep, delta: float) -> float:
    """
    Преобразование Лапласа E[e^{-δτ}] = α(δI - T)⁻¹t

    Args:
        rep: Представление
        delta: Ставка дисконтирования, delta >= 0
    """
    if delta < 0:
        raise DomainError(f"delta должна быть неотрицательной, получено {delta!r}")
    return float(rep.alpha @ linalg.solve(delta * np.eye(rep.n) - rep.T, rep.t))


def moment(rep: PhaseTypeRep, k: int) -> float:
    """Момент E τ^k = k!·α(-T)⁻ᵏ1"""
    v = np.ones(rep.n)
    for _ in range(k):
        v = linalg.solve(-rep.T, v)
    return float(factorial(k) * rep.alpha @ v)


def exit_phase_distribution(rep: PhaseTypeRep) -> np.ndarray:
    """Распределение фазы перед поглощением J_{τ-}: (-αT⁻¹)_j t_j"""
    nu = linalg.solve(rep.T.T, -rep.alpha)
    return nu * rep.t


# ---------------------------------------------------------------------------
# Обращение времени
# ---------------------------------------------------------------------------

def reverse_standard(rep: PhaseTypeRep) -> ReversalResult:
    """
    Стандартное обращение времени

    α* = tᵀΔ_ν, T* = Δ_ν⁻¹TᵀΔ_ν, t* = Δ_ν⁻¹αᵀ, где ν = -αT⁻¹.

    Args:
        rep: Представление (проверяется)

    Returns:
        Обращённое представление
    """
    validate(rep)
    nu = linalg.solve(rep.T.T, -rep.alpha)
    if np.any(nu <= 0):
        raise Reducible("Вектор ν = -αT⁻¹ не является строго положительным")

    alpha_star = rep.t * nu
    alpha_star = alpha_star / alpha_star.sum()
    T_star = rep.T.T * nu[np.newaxis, :] / nu[:, np.newaxis]
    t_star = rep.alpha / nu

    logger.debug(f"Стандартное обращение: n={rep.n}, min ν={nu.min():.3e}")
    return ReversalResult(
        alpha_star=_frozen(alpha_star),
        T_star=_frozen(T_star),
        t_star=_frozen(t_star),
        nu=_frozen(nu),
        alpha_hat=_frozen(rep.alpha),
    )


def reverse_general(rep: PhaseTypeRep, alpha_hat) -> ReversalResult:
    """
    Обращение по произвольному начальному вектору alpha_hat из I(T)

    Args:
        rep: Представление (его alpha не используется и не меняется)
        alpha_hat: Вероятностный вектор с неразложимой T + t·alpha_hat

    Returns:
        Обращение представления (alpha_hat, T)
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    _check_shapes(alpha_hat, rep.T)
    return reverse_standard(PhaseTypeRep(alpha_hat, rep.T))


def _stationary(G: np.ndarray) -> np.ndarray:
    """Стационарное распределение неразложимого генератора G"""
    kernel = linalg.null_space(G.T)
    if kernel.shape[1] != 1:
        raise Reducible(f"Ядро генератора имеет размерность {kernel.shape[1]}")
    pi = kernel[:, 0]
    pi = pi / pi.sum()
    if np.any(pi <= 0):
        raise Reducible("Стационарное распределение не является строго положительным")
    return pi


def event_stationary_alpha(rep: PhaseTypeRep, D: np.ndarray) -> np.ndarray:
    """
    Стационарное по событиям распределение MAP с генератором T + D

    Args:
        rep: Представление
        D: Неотрицательная матрица с D·1 = t

    Returns:
        Вектор πD/(πD1), где π стационарно для T + D
    """
    D = np.asarray(D, dtype=float)
    if D.shape != rep.T.shape or np.any(D < 0):
        raise NotSubGenerator("D должна быть неотрицательной матрицей размера T")
    scale = max(1.0, float(np.max(np.abs(rep.T))))
    if np.any(np.abs(D.sum(axis=1) - rep.t) > 1e-12 * scale):
        raise NotSubGenerator("Суммы строк D должны совпадать с t")

    G = rep.T + D
    if not _strongly_connected(G):
        raise Reducible("T + D не является неразложимой")
    pi = _stationary(G)
    weights = pi @ D
    return weights / weights.sum()


def reverse_map(rep: PhaseTypeRep, D: np.ndarray) -> ReversalResult:
    """
    Обращение через MAP с генератором T + D

    Даёт то же, что reverse_general с alpha_hat = πD/(πD1).
    """
    return reverse_general(rep, event_stationary_alpha(rep, D))


def reverse_stationary(rep: PhaseTypeRep) -> ReversalResult:
    """
    Стационарное обращение: снять убивание, обратить, вернуть убивание

    α* = α = πΔ_t/(πt), T* = Δ_π⁻¹TᵀΔ_π, t* = t.

    Args:
        rep: Представление (его alpha заменяется на πΔ_t/(πt))

    Returns:
        Обращение с alpha_star == alpha_hat и t_star == t
    """
    validate(rep)
    if not _strongly_connected(rep.T + np.diag(rep.t)):
        raise Reducible("T + Δ_t не является неразложимой")

    pi = _stationary(rep.T + np.diag(rep.t))
    alpha_s = pi * rep.t / (pi @ rep.t)
    T_star = rep.T.T * pi[np.newaxis, :] / pi[:, np.newaxis]
    nu = linalg.solve(rep.T.T, -alpha_s)

    return ReversalResult(
        alpha_star=_frozen(alpha_s),
        T_star=_frozen(T_star),
        t_star=_frozen(rep.t),
        nu=_frozen(nu),
        alpha_hat=_frozen(alpha_s),
    )
