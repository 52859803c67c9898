"""
Генератор первого прохождения U для убиваемого MMBM

Спектральный метод: корни матричного квадратичного пучка
(½ζ²Δ_var - ζΔ_drift + Q(δ))h = 0 с Re ζ < 0 и векторы h на фазах подъёма
дают U = H↑·diag(ζ)·H↑⁻¹. Если базис собственных векторов плохо обусловлен
(кратные корни, например для горизонта Эрланга), U восстанавливается по
упорядоченной вещественной форме Шура на устойчивом инвариантном
подпространстве.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from fluid_embedding import FluidModel
from utils import DefectiveSpectrum, DomainError, InvalidModel, NoUpPhases

logger = logging.getLogger(__name__)

# Корни с |Re ζ| <= STABLE_TOL считаются лежащими на мнимой оси
STABLE_TOL = 1e-10
# Допуск знаковой структуры восстановленного U
SUBGEN_TOL = 1e-9
# Обусловленность H↑, при которой спектральный путь отвергается
DEFECTIVE_COND = 1e10
# Обусловленность H↑, выше которой U берётся из формы Шура
SPECTRAL_ACCURACY_COND = 1e6
# Диагональные элементы треугольного U ближе DIAGONAL_SNAP_TOL·scale считаются равными
DIAGONAL_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class PassageOperator:
    """Генератор U цепи фаз в моменты первого прохождения уровней вверх"""

    U: np.ndarray
    u: np.ndarray
    up_index: Tuple[int, ...]  # строка U -> индекс фазы FluidModel
    delta: float
    method: str = 'spectral'

    @property
    def r(self) -> int:
        """Число фаз подъёма"""
        return self.U.shape[0]


def up_phases(fluid: FluidModel) -> np.ndarray:
    """Фазы подъёма: положительная дисперсия или положительный снос"""
    return np.flatnonzero((fluid.var > 0) | (fluid.drift > 0))


def killed_generator(fluid: FluidModel, delta: float) -> np.ndarray:
    """Q(δ) = Q - δ·Δ_{real_time_mask}: дополнительное убивание в броуновских фазах"""
    return fluid.Q - delta * np.diag(fluid.real_time_mask.astype(float))


def companion_matrix(fluid: FluidModel, delta: float) -> np.ndarray:
    """
    Линеаризация квадратичного пучка

    Неизвестные w = (h, g_V), где g_p = ζh_p на фазах с дисперсией.
    Размер 2·|V| + |L| совпадает со степенью определителя пучка.

    Args:
        fluid: Модель MMBM
        delta: Ставка дисконтирования

    Returns:
        Матрица A с Aw = ζw
    """
    Qd = killed_generator(fluid, delta)
    m = fluid.m
    variance_phases = np.flatnonzero(fluid.var > 0)
    size = m + variance_phases.size
    A = np.zeros((size, size))

    position = {p: m + s for s, p in enumerate(variance_phases)}
    for p in range(m):
        if fluid.var[p] > 0:
            g = position[p]
            # ζh_p = g_p
            A[p, g] = 1.0
            # ζg_p = (2/v_p)(d_p g_p - (Qh)_p)
            A[g, :m] = -2.0 * Qd[p] / fluid.var[p]
            A[g, g] = 2.0 * fluid.drift[p] / fluid.var[p]
        else:
            # ζh_p = (Qh)_p / d_p
            A[p, :m] = Qd[p] / fluid.drift[p]
    return A


def _check_phases(fluid: FluidModel) -> np.ndarray:
    degenerate = np.flatnonzero((fluid.var <= 0) & (fluid.drift == 0))
    if degenerate.size:
        raise InvalidModel(f"Фазы без дисперсии и сноса: {degenerate.tolist()}")
    up = up_phases(fluid)
    if up.size == 0:
        raise NoUpPhases("Нет фаз с положительной дисперсией или сносом")
    return up


def _check_roots(eigenvalues: np.ndarray, r: int):
    near_axis = np.abs(eigenvalues.real) <= STABLE_TOL
    if np.any(near_axis):
        raise DefectiveSpectrum(
            f"{int(near_axis.sum())} корней пучка на мнимой оси (|Re| <= {STABLE_TOL})"
        )
    stable = int(np.sum(eigenvalues.real < -STABLE_TOL))
    if stable != r:
        raise DefectiveSpectrum(
            f"Число корней с Re < 0 равно {stable}, ожидается {r} (число фаз подъёма)"
        )


def spectral_solve(fluid: FluidModel, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Устойчивые корни пучка и соответствующие векторы

    Args:
        fluid: Модель MMBM
        delta: Ставка дисконтирования

    Returns:
        (ζ длины r, H размера m×r): векторы h по всем фазам
    """
    if delta < 0:
        raise DomainError(f"delta должна быть неотрицательной, получено {delta!r}")
    up = _check_phases(fluid)
    A = companion_matrix(fluid, delta)

    eigenvalues, vectors = linalg.eig(A)
    _check_roots(eigenvalues, up.size)

    stable = np.flatnonzero(eigenvalues.real < -STABLE_TOL)
    zeta = eigenvalues[stable]
    H = vectors[:fluid.m, stable]

    cond = np.linalg.cond(H[up])
    if not np.isfinite(cond) or cond > DEFECTIVE_COND:
        raise DefectiveSpectrum(f"Базис H↑ вырожден (обусловленность {cond:.3e})")
    return zeta, H


def _from_spectral(fluid: FluidModel, delta: float, up: np.ndarray) -> np.ndarray:
    zeta, H = spectral_solve(fluid, delta)
    H_up = H[up]
    cond = np.linalg.cond(H_up)
    if cond > SPECTRAL_ACCURACY_COND:
        raise DefectiveSpectrum(f"Базис H↑ плохо обусловлен ({cond:.3e})")

    U = linalg.solve(H_up.T, (H_up * zeta[np.newaxis, :]).T).T
    scale = max(1.0, float(np.max(np.abs(U))))
    if np.max(np.abs(U.imag)) > SUBGEN_TOL * scale:
        raise DefectiveSpectrum("Восстановленный U имеет существенную мнимую часть")
    logger.debug(f"U по спектральному разложению: r={up.size}, cond(H↑)={cond:.3e}")
    return U.real


def _from_schur(fluid: FluidModel, delta: float, up: np.ndarray) -> np.ndarray:
    A = companion_matrix(fluid, delta)
    _check_roots(linalg.eigvals(A), up.size)
    try:
        R, Z, sdim = linalg.schur(
            A, output='real', sort=lambda re, im: re < -STABLE_TOL
        )
    except linalg.LinAlgError as e:
        raise DefectiveSpectrum(f"Упорядочение формы Шура не удалось: {e}") from e
    if sdim != up.size:
        raise DefectiveSpectrum(
            f"Размерность устойчивого подпространства {sdim}, ожидается {up.size}"
        )

    S_up = Z[up, :sdim]
    cond = np.linalg.cond(S_up)
    if not np.isfinite(cond) or cond > DEFECTIVE_COND:
        raise DefectiveSpectrum(f"Базис Шура на фазах подъёма вырожден ({cond:.3e})")

    # U·S↑ = S↑·R11
    U = linalg.solve(S_up.T, (S_up @ R[:sdim, :sdim]).T).T
    logger.debug(f"U по форме Шура: r={up.size}, cond(S↑)={cond:.3e}")
    return U


def snap_triangular_diagonal(U: np.ndarray) -> np.ndarray:
    """
    Выравнивание почти равных диагональных элементов треугольной матрицы

    Кратные корни (горизонт Эрланга) дают диагональ, равную лишь с точностью
    до округления, а scipy.linalg.expm для треугольной матрицы строит
    наддиагональ из разностей exp(U_ii x) - exp(U_jj x). Кластеры заменяются
    своим средним.

    Args:
        U: Квадратная матрица (не изменяется)

    Returns:
        Копия U с выровненной диагональю (для нетреугольной - просто копия)
    """
    U = np.array(U, dtype=float)
    triangular = not np.any(np.tril(U, -1)) or not np.any(np.triu(U, 1))
    if not triangular or U.shape[0] < 2:
        return U

    scale = max(1.0, float(np.max(np.abs(U))))
    diagonal = np.diag(U).copy()
    order = np.argsort(diagonal)
    cluster = [order[0]]
    for index in order[1:]:
        if diagonal[index] - diagonal[cluster[-1]] <= DIAGONAL_SNAP_TOL * scale:
            cluster.append(index)
            continue
        diagonal[cluster] = diagonal[cluster].mean()
        cluster = [index]
    diagonal[cluster] = diagonal[cluster].mean()
    np.fill_diagonal(U, diagonal)
    return U


def _as_sub_generator(U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Проверка знаков, обнуление малых отрицательных значений, u = -U·1"""
    U = np.array(U, dtype=float)
    scale = max(1.0, float(np.max(np.abs(U))))
    off = ~np.eye(U.shape[0], dtype=bool)
    if np.any(U[off] < -SUBGEN_TOL * scale):
        raise DefectiveSpectrum(
            f"U не является субгенератором: внедиагональный минимум {U[off].min():.3e}"
        )
    U[off & (U < 0)] = 0.0
    U = snap_triangular_diagonal(U)

    u = -U.sum(axis=1)
    if np.any(u < -SUBGEN_TOL * scale):
        raise DefectiveSpectrum(f"Отрицательная интенсивность выхода {u.min():.3e}")
    # Диагональ не трогаем: после выравнивания она должна остаться точной
    return U, np.maximum(u, 0.0)


def _solve(fluid: FluidModel, delta: float) -> PassageOperator:
    up = _check_phases(fluid)
    try:
        U = _from_spectral(fluid, delta, up)
        method = 'spectral'
    except DefectiveSpectrum as e:
        logger.debug(f"⚠️ Спектральный путь отклонён ({e}), переход к форме Шура")
        U = _from_schur(fluid, delta, up)
        method = 'schur'

    U, u = _as_sub_generator(U)
    U.setflags(write=False)
    u.setflags(write=False)
    return PassageOperator(U=U, u=u, up_index=tuple(int(p) for p in up),
                           delta=float(delta), method=method)


def compute_passage(fluid: FluidModel, delta: float = 0.0) -> PassageOperator:
    """
    Генератор первого прохождения вверх

    При delta > 0 матрица U(δ) строится для Q(δ), а вектор выхода u берётся
    от недисконтированного оператора.

    Args:
        fluid: Модель MMBM
        delta: Ставка дисконтирования δ >= 0

    Returns:
        Оператор первого прохождения
    """
    if delta < 0:
        raise DomainError(f"delta должна быть неотрицательной, получено {delta!r}")

    base = _solve(fluid, 0.0)
    if delta == 0:
        return base

    discounted = _solve(fluid, delta)
    return PassageOperator(U=discounted.U, u=base.u, up_index=discounted.up_index,
                           delta=float(delta), method=discounted.method)
