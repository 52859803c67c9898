"""
Погружение скачкообразной диффузии с PH-скачками в броуновское движение,
модулированное марковской цепью (скачки "разглаживаются" в участки с
наклоном ±1)
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ph_core import PhaseTypeRep, validate
from utils import InvalidModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JumpDiffusionModel:
    """
    Броуновское движение BM(mu, sigma2) плюс двусторонние сложные
    пуассоновские скачки с PH-распределёнными размерами
    """

    mu: float
    sigma2: float
    lam_plus: float = 0.0
    ph_plus: Optional[PhaseTypeRep] = None
    lam_minus: float = 0.0
    ph_minus: Optional[PhaseTypeRep] = None

    @property
    def n_plus(self) -> int:
        return 0 if self.ph_plus is None else self.ph_plus.n

    @property
    def n_minus(self) -> int:
        return 0 if self.ph_minus is None else self.ph_minus.n

    def flipped(self) -> 'JumpDiffusionModel':
        """Модель для -X: знак сноса меняется, скачки вверх и вниз меняются местами"""
        return JumpDiffusionModel(
            mu=-self.mu,
            sigma2=self.sigma2,
            lam_plus=self.lam_minus,
            ph_plus=self.ph_minus,
            lam_minus=self.lam_plus,
            ph_minus=self.ph_plus,
        )


def validate_model(model: JumpDiffusionModel) -> JumpDiffusionModel:
    """
    Проверка модели

    Args:
        model: Модель скачкообразной диффузии

    Returns:
        Та же модель, если инварианты выполнены
    """
    if not model.sigma2 > 0:
        raise InvalidModel(f"sigma2 должна быть положительной, получено {model.sigma2!r}")
    for side, lam, ph in (('plus', model.lam_plus, model.ph_plus),
                          ('minus', model.lam_minus, model.ph_minus)):
        if lam < 0:
            raise InvalidModel(f"lam_{side} должна быть неотрицательной")
        if (lam == 0) != (ph is None):
            raise InvalidModel(
                f"lam_{side}=0 допускается только без распределения скачков и наоборот"
            )
        if ph is not None:
            validate(ph)
    return model


@dataclass(frozen=True)
class FluidModel:
    """
    Убиваемое MMBM: генератор фаз Q (с убиванием), снос и дисперсия по фазам

    Порядок фаз: n броуновских, затем n·n⁺ фаз скачков вверх (по i),
    затем n·n⁻ фаз скачков вниз (по i).
    """

    Q: np.ndarray
    drift: np.ndarray
    var: np.ndarray
    real_time_mask: np.ndarray
    labels: Tuple[tuple, ...] = field(repr=False)

    @property
    def m(self) -> int:
        """Число фаз"""
        return self.Q.shape[0]

    @property
    def killing(self) -> np.ndarray:
        """Интенсивности убивания -Q·1"""
        return -self.Q.sum(axis=1)


def embed(model: JumpDiffusionModel, horizon: PhaseTypeRep) -> FluidModel:
    """
    Построение MMBM по модели и PH-горизонту

    Args:
        model: Модель скачкообразной диффузии
        horizon: PH-представление горизонта τ

    Returns:
        Модель с n(1 + n⁺ + n⁻) фазами
    """
    validate_model(model)
    validate(horizon)

    n, n_plus, n_minus = horizon.n, model.n_plus, model.n_minus
    m = n * (1 + n_plus + n_minus)

    def plus_index(i, j):
        return n + i * n_plus + j

    def minus_index(i, j):
        return n + n * n_plus + i * n_minus + j

    Q = np.zeros((m, m))
    drift = np.zeros(m)
    var = np.zeros(m)
    labels = [None] * m

    # Броуновские фазы: переходы горизонта, начало скачков, убивание t_i
    Q[:n, :n] = horizon.T
    drift[:n] = model.mu
    var[:n] = model.sigma2
    for i in range(n):
        labels[i] = (i,)
        for j in range(n_plus):
            Q[i, plus_index(i, j)] = model.lam_plus * model.ph_plus.alpha[j]
        for j in range(n_minus):
            Q[i, minus_index(i, j)] = model.lam_minus * model.ph_minus.alpha[j]
        Q[i, i] -= model.lam_plus + model.lam_minus

    # Фазы скачков: PH-блок, по окончании скачка возврат в фазу i, без убивания
    for side, n_side, ph, index, slope in (
        ('+', n_plus, model.ph_plus, plus_index, 1.0),
        ('-', n_minus, model.ph_minus, minus_index, -1.0),
    ):
        for i in range(n):
            for j in range(n_side):
                p = index(i, j)
                labels[p] = (i, j, side)
                drift[p] = slope
                for k in range(n_side):
                    Q[p, index(i, k)] = ph.T[j, k]
                Q[p, i] = ph.t[j]

    logger.debug(f"Погружение: m={m} (n={n}, n⁺={n_plus}, n⁻={n_minus})")
    mask = var > 0
    for array in (Q, drift, var, mask):
        array.setflags(write=False)
    return FluidModel(Q=Q, drift=drift, var=var, real_time_mask=mask, labels=tuple(labels))


def embed_negated(model: JumpDiffusionModel, horizon: PhaseTypeRep) -> FluidModel:
    """Погружение для -X: первое прохождение вниз как прохождение вверх у -X"""
    return embed(model.flipped(), horizon)
