"""
Факторизация совместного закона (X̄_τ, X_τ, J_σ̄, J_τ-) для скачкообразной
диффузии на PH-горизонте: константы c_k, r_k, обращённое представление и
плотности, в том числе с дисконтированием
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.integrate import quad_vec

from first_passage import PassageOperator, compute_passage
from fluid_embedding import JumpDiffusionModel, embed, embed_negated, validate_model
from ph_core import (
    PhaseTypeRep,
    ReversalResult,
    exit_phase_distribution,
    reverse_general,
    reverse_standard,
    reverse_stationary,
    validate,
)
from utils import DomainError, InconsistentR, IndexOutOfRange

logger = logging.getLogger(__name__)

# c_k ниже порога считается нулём (фаза недостижима на супремуме)
C_ZERO_TOL = 1e-12
# Допустимое относительное расхождение двух формул для r_k
R_CONSISTENCY_TOL = 1e-6
# Порог хвоста α·e^{Ux}·1 при выборе верхнего предела квадратур
TAIL_TOL = 1e-10


class ReversalKind(str, Enum):
    """Способ обращения времени горизонта"""

    STANDARD = 'standard'
    GENERAL = 'general'
    STATIONARY = 'stationary'


@dataclass(frozen=True)
class FactorizationTables:
    """Собранные части факторизации"""

    model: JumpDiffusionModel
    horizon: PhaseTypeRep
    reversal: ReversalResult
    up: PassageOperator        # U(δ), u (δ = 0)
    down: PassageOperator      # U*(δ), u* (δ = 0)
    up_zero: PassageOperator   # U, u при δ = 0
    down_zero: PassageOperator
    alpha_ext: np.ndarray      # α, дополненный нулями до размера U
    alpha_star_ext: np.ndarray  # α*, дополненный нулями до размера U*
    c: np.ndarray              # P(J_σ̄ = k) по фазам подъёма
    r: np.ndarray              # r_k = u_k u*_k / c_k по фазам горизонта
    r_alt: np.ndarray          # r_k = u_k / (-α* U*⁻¹)_k
    delta: float

    @property
    def n(self) -> int:
        """Число фаз горизонта"""
        return self.horizon.n


def _pad(vector: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[:vector.size] = vector
    return out


def _reverse(horizon: PhaseTypeRep, reversal: ReversalKind,
             alpha_hat: Optional[np.ndarray]) -> ReversalResult:
    reversal = ReversalKind(reversal)
    if reversal is ReversalKind.STANDARD:
        return reverse_standard(horizon)
    if reversal is ReversalKind.GENERAL:
        if alpha_hat is None:
            raise DomainError("Для обращения 'general' нужен alpha_hat")
        return reverse_general(horizon, alpha_hat)
    return reverse_stationary(horizon)


def _green(operator: PassageOperator, row: np.ndarray) -> np.ndarray:
    """-row·U⁻¹: ожидаемое время (по уровню) в каждой фазе подъёма"""
    return linalg.solve(operator.U.T, -row)


def build_tables(
    model: JumpDiffusionModel,
    horizon: PhaseTypeRep,
    delta: float = 0.0,
    reversal: ReversalKind = ReversalKind.STANDARD,
    alpha_hat: Optional[Sequence[float]] = None,
) -> FactorizationTables:
    """
    Сборка факторизации

    Args:
        model: Модель скачкообразной диффузии
        horizon: PH-представление горизонта
        delta: Ставка дисконтирования δ >= 0
        reversal: Способ обращения времени
        alpha_hat: Начальный вектор для обращения 'general'

    Returns:
        Таблицы факторизации
    """
    if delta < 0:
        raise DomainError(f"delta должна быть неотрицательной, получено {delta!r}")
    validate_model(model)
    validate(horizon)
    n = horizon.n

    rev = _reverse(horizon, reversal, None if alpha_hat is None else np.asarray(alpha_hat, dtype=float))
    fluid_up = embed(model, horizon)
    fluid_down = embed_negated(model, rev.as_rep())

    up_zero = compute_passage(fluid_up, 0.0)
    down_zero = compute_passage(fluid_down, 0.0)
    up = up_zero if delta == 0 else compute_passage(fluid_up, delta)
    down = down_zero if delta == 0 else compute_passage(fluid_down, delta)

    alpha_ext = _pad(horizon.alpha, up_zero.r)
    alpha_hat_ext = _pad(rev.alpha_hat, up_zero.r)
    alpha_star_ext = _pad(rev.alpha_star, down_zero.r)

    # Закон фазы на супремуме при истинном α
    c = _green(up_zero, alpha_ext) * up_zero.u
    c[c < C_ZERO_TOL] = 0.0

    # r_k строятся по тому начальному вектору, от которого взято обращение
    green_hat = _green(up_zero, alpha_hat_ext)
    green_star = _green(down_zero, alpha_star_ext)
    c_hat = green_hat * up_zero.u
    u, u_star = up_zero.u[:n], down_zero.u[:n]

    r = np.zeros(n)
    r_alt = np.zeros(n)
    for k in range(n):
        if c_hat[k] < C_ZERO_TOL:
            continue
        r[k] = u_star[k] / green_hat[k]
        r_alt[k] = u[k] / green_star[k]
        gap = abs(r[k] - r_alt[k])
        if gap > R_CONSISTENCY_TOL * max(abs(r[k]), abs(r_alt[k]), C_ZERO_TOL):
            raise InconsistentR(
                f"r_{k}: u*/(-αU⁻¹) = {r[k]!r}, u/(-α*U*⁻¹) = {r_alt[k]!r}"
            )

    logger.debug(
        f"Факторизация: n={n}, r_up={up.r}, r_down={down.r}, δ={delta}, "
        f"методы U/U*: {up.method}/{down.method}"
    )
    for array in (alpha_ext, alpha_star_ext, c, r, r_alt):
        array.setflags(write=False)
    return FactorizationTables(
        model=model,
        horizon=horizon,
        reversal=rev,
        up=up,
        down=down,
        up_zero=up_zero,
        down_zero=down_zero,
        alpha_ext=alpha_ext,
        alpha_star_ext=alpha_star_ext,
        c=c,
        r=r,
        r_alt=r_alt,
        delta=float(delta),
    )


# ---------------------------------------------------------------------------
# Плотности
# ---------------------------------------------------------------------------

def _index(value: int, size: int, name: str) -> int:
    if not 0 <= value < size:
        raise IndexOutOfRange(f"{name}={value} вне диапазона [0, {size})")
    return int(value)


def _start_row(initial: Optional[int], mixture: np.ndarray, size: int, name: str) -> np.ndarray:
    """Строка начального распределения: смесь по α (None) или e_i"""
    if initial is None:
        return mixture
    row = np.zeros(size)
    row[_index(initial, size, name)] = 1.0
    return row


def sup_density(tables: FactorizationTables, i: Optional[int], x: float, k: int) -> float:
    """
    Плотность P_i(X̄_τ ∈ dx, J_σ̄ = k) = (e^{Ux})_{ik} u_k

    При δ > 0 это плотность E_i[e^{-δσ̄}; X̄_τ ∈ dx, J_σ̄ = k].
    i=None означает смесь по α.
    """
    if not x > 0:
        raise DomainError(f"x должен быть положительным, получено {x!r}")
    r = tables.up.r
    k = _index(k, r, 'k')
    row = _start_row(i, tables.alpha_ext, r, 'i')
    return float(row @ linalg.expm(tables.up.U * x)[:, k] * tables.up.u[k])


def inf_density(tables: FactorizationTables, j: Optional[int], y: float, k: int) -> float:
    """
    Плотность P*_j(X̲_τ ∈ dy, J_σ̲ = k) = (e^{-U*y})_{jk} u*_k, y <= 0

    j=None означает смесь по α*.
    """
    if y > 0:
        raise DomainError(f"y должен быть неположительным, получено {y!r}")
    r = tables.down.r
    k = _index(k, r, 'k')
    row = _start_row(j, tables.alpha_star_ext, r, 'j')
    return float(row @ linalg.expm(-tables.down.U * y)[:, k] * tables.down.u[k])


def conditional_inf_density(tables: FactorizationTables, y: float, k: int) -> float:
    """
    Условная плотность P*(X̲_τ ∈ dy | J_σ̲ = k)

    Не зависит от выбора обращения.
    """
    green_star = _green(tables.down_zero, tables.alpha_star_ext)
    k = _index(k, tables.down.r, 'k')
    c_star = green_star[k] * tables.down_zero.u[k]
    if c_star < C_ZERO_TOL:
        raise DomainError(f"Фаза {k} недостижима на инфимуме (c*_k = {c_star!r})")
    return inf_density(tables, None, y, k) / c_star


def joint_density(tables: FactorizationTables, i: Optional[int], x: float, y: float,
                  k: int, j: int) -> float:
    """
    Совместная плотность (X̄_τ ∈ dx, X_τ ∈ dy, J_σ̄ = k, J_τ- = j)

    r_k·α*_j·(e^{U(δ)x})_{ik}·(e^{U*(δ)(x-y)})_{jk}; при δ > 0 с весом e^{-δτ}.

    Args:
        tables: Таблицы факторизации
        i: Начальная фаза (None - смесь по α)
        x: Уровень супремума, x > 0
        y: Конечное положение, y < x
        k: Фаза на супремуме
        j: Фаза перед окончанием горизонта
    """
    if not x > 0:
        raise DomainError(f"x должен быть положительным, получено {x!r}")
    if not y < x:
        raise DomainError(f"Требуется y < x, получено x={x!r}, y={y!r}")
    n = tables.n
    k = _index(k, tables.up.r, 'k')
    j = _index(j, n, 'j')
    row = _start_row(i, tables.alpha_ext, tables.up.r, 'i')
    if i is not None:
        _index(i, n, 'i')
    # Фазы скачков не бывают фазами супремума
    if k >= n:
        return 0.0

    left = row @ linalg.expm(tables.up.U * x)[:, k]
    right = linalg.expm(tables.down.U * (x - y))[j, k]
    return float(tables.r[k] * tables.alpha_star_ext[j] * left * right)


def joint_density_grid(tables: FactorizationTables, xs: Sequence[float],
                       ys: Sequence[float]) -> List[Tuple[float, float, int, int, float]]:
    """
    Значения совместной плотности (смесь по α) на сетке

    Returns:
        Строки (x, y, k, j, value) для всех x > 0, y < x и фаз k, j горизонта
    """
    n = tables.n
    rows = []
    for x in xs:
        if not x > 0:
            continue
        left = tables.alpha_ext @ linalg.expm(tables.up.U * x)
        for y in ys:
            if not y < x:
                continue
            right = linalg.expm(tables.down.U * (x - y))
            for k in range(n):
                for j in range(n):
                    value = tables.r[k] * tables.alpha_star_ext[j] * left[k] * right[j, k]
                    rows.append((float(x), float(y), k, j, float(value)))
    return rows


# ---------------------------------------------------------------------------
# Законы фаз и интегральные величины
# ---------------------------------------------------------------------------

def phase_at_sup_distribution(tables: FactorizationTables) -> np.ndarray:
    """c_k = P(J_σ̄ = k) по фазам подъёма (нули на фазах скачков)"""
    return np.array(tables.c)


def phase_at_end_distribution(tables: FactorizationTables) -> np.ndarray:
    """Закон J_τ-: (-αT⁻¹)_j t_j"""
    return exit_phase_distribution(tables.horizon)


def sup_tail(tables: FactorizationTables, x: float) -> float:
    """P(X̄_τ > x) = α·e^{Ux}·1 (δ = 0)"""
    if x < 0:
        return 1.0
    return float(tables.alpha_ext @ linalg.expm(tables.up_zero.U * x).sum(axis=1))


def _upper_limit(U: np.ndarray, row: np.ndarray) -> float:
    """Наименьшее x = 2^m, при котором row·e^{Ux}·1 < TAIL_TOL"""
    limit = 1.0
    while row @ linalg.expm(U * limit).sum(axis=1) >= TAIL_TOL:
        limit *= 2.0
        if limit > 1e8:
            raise DomainError("Хвост не убывает: проверьте устойчивость U")
    return limit


def _integrated_row(U: np.ndarray, row: np.ndarray) -> np.ndarray:
    """∫_0^∞ row·e^{Ux} dx адаптивной квадратурой"""
    limit = _upper_limit(U, row)
    value, _ = quad_vec(lambda s: row @ linalg.expm(U * s), 0.0, limit,
                        epsabs=1e-13, epsrel=1e-11, limit=2000)
    return value


def total_mass(tables: FactorizationTables, method: str = 'closed') -> float:
    """
    Полная масса совместной плотности (смесь по α)

    При δ = 0 равна 1, при δ > 0 равна E e^{-δτ}.

    Args:
        tables: Таблицы факторизации
        method: 'closed' (через U⁻¹) или 'quadrature'
    """
    n = tables.n
    if method == 'closed':
        up_part = _green(tables.up, tables.alpha_ext)
        down_part = _green(tables.down, tables.alpha_star_ext)
    elif method == 'quadrature':
        up_part = _integrated_row(tables.up.U, tables.alpha_ext)
        down_part = _integrated_row(tables.down.U, tables.alpha_star_ext)
    else:
        raise DomainError(f"Неизвестный метод: {method}")
    return float(np.sum(tables.r * up_part[:n] * down_part[:n]))


def marginal_sup_from_joint(tables: FactorizationTables, i: Optional[int], x: float,
                            k: int) -> float:
    """∫ совместной плотности по y и сумма по j (квадратура)"""
    n = tables.n
    k = _index(k, n, 'k')
    row = _start_row(i, tables.alpha_ext, tables.up.r, 'i')
    down_part = _integrated_row(tables.down.U, tables.alpha_star_ext)
    left = row @ linalg.expm(tables.up.U * x)[:, k]
    return float(tables.r[k] * left * down_part[k])


def cell_probabilities(tables: FactorizationTables, x_edges: Sequence[float],
                       w_edges: Sequence[float]) -> np.ndarray:
    """
    Вероятности прямоугольников по (X̄_τ, X̄_τ - X_τ) для каждой пары (k, j)

    ∫_a^b e^{Ux}dx = U⁻¹(e^{Ub} - e^{Ua}); плотность в координатах
    (x, w = x - y) распадается в произведение при фиксированном k.

    Returns:
        Массив формы (len(x_edges)-1, len(w_edges)-1, n, n) с индексами [x, w, k, j]
    """
    n = tables.n
    x_edges = np.asarray(x_edges, dtype=float)
    w_edges = np.asarray(w_edges, dtype=float)
    if np.any(np.diff(x_edges) <= 0) or np.any(np.diff(w_edges) <= 0):
        raise DomainError("Границы ячеек должны строго возрастать")
    if x_edges[0] < 0 or w_edges[0] < 0:
        raise DomainError("Границы ячеек должны быть неотрицательны")

    U, D = tables.up.U, tables.down.U
    primitive_up = np.array([tables.alpha_ext @ linalg.solve(U, linalg.expm(U * e))
                             for e in x_edges])[:, :n]
    primitive_down = np.array([linalg.solve(D, linalg.expm(D * e)) for e in w_edges])[:, :n, :n]
    up_cells = np.diff(primitive_up, axis=0)            # [x, k]
    down_cells = np.diff(primitive_down, axis=0)        # [w, j, k]

    alpha_star = tables.alpha_star_ext[:n]
    return np.einsum('k,j,xk,wjk->xwkj', tables.r, alpha_star, up_cells, down_cells)
