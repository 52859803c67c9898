"""
Монте-Карло оракул: точная симуляция (X̄_τ, X_τ, J_σ̄, J_τ-) для
скачкообразной диффузии на PH-горизонте

Максимум броуновского участка между событиями берётся точно из закона
максимума броуновского моста. Каждый путь использует собственный поток
Philox, определяемый парой (seed, номер пути), поэтому результат не зависит
от разбиения на порции и числа процессов.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from config import Config
from fluid_embedding import JumpDiffusionModel, validate_model
from ph_core import PhaseTypeRep, cdf, validate
from utils import DomainError

logger = logging.getLogger(__name__)

# Число подынтервалов для приближения момента супремума
SIGMA_BAR_SUBINTERVALS = 1024


@dataclass(frozen=True)
class PathSample:
    """Результат одного пути"""

    tau: float
    sup: float
    x_tau: float
    phase_at_sup: int
    phase_at_end: int
    sigma_bar: Optional[float] = None  # только при track_sigma_bar


@dataclass(frozen=True)
class SimConfig:
    """Параметры симуляции"""

    seed: int
    n_paths: int
    bin_edges_x: np.ndarray
    bin_edges_y: np.ndarray  # по отступу X̄_τ - X_τ
    track_sigma_bar: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError(f"n_paths должно быть >= 1, получено {self.n_paths!r}")
        if not 0 <= self.seed < 2 ** 128:
            raise DomainError(f"seed должен лежать в [0, 2^128), получено {self.seed!r}")
        for name in ('bin_edges_x', 'bin_edges_y'):
            edges = np.asarray(getattr(self, name), dtype=float)
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise DomainError(f"{name} должны строго возрастать (минимум две границы)")
            object.__setattr__(self, name, edges)


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Независимый поток для пути: ключ Philox = seed, старшие 128 бит счётчика = index"""
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 128))


def bridge_max(a: float, b: float, variance: float, uniform: float) -> float:
    """
    Максимум броуновского моста от a до b обратным преобразованием

    P(M >= m | a, b) = exp(-2(m-a)(m-b)/variance), m >= max(a, b)

    Args:
        a: Начальное значение
        b: Конечное значение
        variance: sigma2·Δt
        uniform: Равномерная величина из (0, 1]
    """
    if variance <= 0:
        return max(a, b)
    return 0.5 * (a + b + math.sqrt((b - a) ** 2 - 2.0 * variance * math.log(uniform)))


class _PhaseChain:
    """Вложенная цепь PH-представления: времена пребывания и переходы"""

    def __init__(self, rep: PhaseTypeRep):
        n = rep.n
        self.n = n
        self.alpha_cum = np.cumsum(rep.alpha)
        self.rates = -np.diag(rep.T)
        jumps = np.zeros((n, n + 1))
        jumps[:, :n] = rep.T / self.rates[:, np.newaxis]
        np.fill_diagonal(jumps[:, :n], 0.0)
        jumps[:, n] = rep.t / self.rates
        # Последний столбец - поглощение
        self.jump_cum = np.cumsum(jumps, axis=1)

    @staticmethod
    def _pick(cumulative: np.ndarray, uniform: float) -> int:
        index = int(np.searchsorted(cumulative, uniform * cumulative[-1], side='right'))
        return min(index, cumulative.size - 1)

    def start(self, rng: np.random.Generator) -> int:
        return self._pick(self.alpha_cum, rng.random())

    def step(self, phase: int, rng: np.random.Generator) -> Tuple[float, Optional[int]]:
        """(время пребывания, следующая фаза или None при поглощении)"""
        holding = rng.exponential(1.0 / self.rates[phase])
        nxt = self._pick(self.jump_cum[phase], rng.random())
        return holding, (None if nxt == self.n else nxt)

    def run(self, rng: np.random.Generator) -> Tuple[float, List[Tuple[int, float, float]]]:
        segments = []
        clock = 0.0
        phase = self.start(rng)
        while phase is not None:
            holding, nxt = self.step(phase, rng)
            segments.append((phase, clock, clock + holding))
            clock += holding
            phase = nxt
        return clock, segments

    def sample(self, rng: np.random.Generator) -> float:
        return self.run(rng)[0]


def sample_ph(rep: PhaseTypeRep, rng: np.random.Generator) -> float:
    """Одна PH-распределённая величина"""
    return _PhaseChain(rep).sample(rng)


def sample_phase_path(horizon: PhaseTypeRep,
                      rng: np.random.Generator) -> Tuple[float, List[Tuple[int, float, float]]]:
    """
    Траектория фазы горизонта до поглощения

    Returns:
        (tau, [(фаза, начало, конец), ...]) - отрезки смежны и покрывают [0, tau]
    """
    return _PhaseChain(horizon).run(rng)


class _PathSimulator:
    """Симулятор путей с заранее подготовленными цепями"""

    def __init__(self, model: JumpDiffusionModel, horizon: PhaseTypeRep):
        self.model = model
        self.horizon = _PhaseChain(horizon)
        self.jump_up = None if model.ph_plus is None else _PhaseChain(model.ph_plus)
        self.jump_down = None if model.ph_minus is None else _PhaseChain(model.ph_minus)
        self.jump_rate = model.lam_plus + model.lam_minus
        self.scale = math.sqrt(model.sigma2)

    def _jump(self, rng: np.random.Generator) -> float:
        if rng.random() * self.jump_rate < self.model.lam_plus:
            return self.jump_up.sample(rng)
        return -self.jump_down.sample(rng)

    def sample(self, rng: np.random.Generator, track_sigma_bar: bool = False) -> PathSample:
        mu, sigma2 = self.model.mu, self.model.sigma2
        tau, segments = self.horizon.run(rng)

        x = 0.0
        sup = 0.0
        sup_phase = segments[0][0]
        sup_piece = None  # (начало, длина, a, b) участка с максимумом

        for phase, start, end in segments:
            clock = start
            while True:
                wait = rng.exponential(1.0 / self.jump_rate) if self.jump_rate > 0 else math.inf
                stop = min(clock + wait, end)
                dt = stop - clock
                b = x + mu * dt + self.scale * math.sqrt(dt) * rng.standard_normal()
                peak = bridge_max(x, b, sigma2 * dt, 1.0 - rng.random())
                # Строгое сравнение: при равенстве остаётся более ранний участок
                if peak > sup:
                    sup, sup_phase = peak, phase
                    sup_piece = (clock, dt, x, b)
                x, clock = b, stop
                if stop >= end:
                    break
                # Значение до скачка ограничивает предыдущий участок
                x += self._jump(rng)

        sigma_bar = None
        if track_sigma_bar:
            sigma_bar = 0.0 if sup_piece is None else self._locate_sup(sup_piece, rng)
        return PathSample(tau=tau, sup=sup, x_tau=x, phase_at_sup=sup_phase,
                          phase_at_end=segments[-1][0], sigma_bar=sigma_bar)

    def _locate_sup(self, piece, rng: np.random.Generator) -> float:
        """Приближённый момент супремума: подынтервал моста с наибольшим максимумом"""
        start, length, a, b = piece
        steps = SIGMA_BAR_SUBINTERVALS
        h = length / steps
        increments = self.scale * math.sqrt(h) * rng.standard_normal(steps)
        walk = np.concatenate(([0.0], np.cumsum(increments)))
        grid = np.linspace(0.0, 1.0, steps + 1)
        bridge = a + walk - grid * walk[-1] + grid * (b - a)

        lo, hi = bridge[:-1], bridge[1:]
        uniforms = 1.0 - rng.random(steps)
        peaks = 0.5 * (lo + hi + np.sqrt((hi - lo) ** 2 - 2.0 * self.model.sigma2 * h * np.log(uniforms)))
        best = int(np.argmax(peaks))
        return start + (best + 0.5) * h


def sample_path(model: JumpDiffusionModel, horizon: PhaseTypeRep, rng: np.random.Generator,
                track_sigma_bar: bool = False) -> PathSample:
    """
    Один путь скачкообразной диффузии на PH-горизонте

    Args:
        model: Модель
        horizon: PH-горизонт
        rng: Генератор случайных чисел
        track_sigma_bar: Приближать момент супремума

    Returns:
        Результат пути
    """
    return _PathSimulator(model, horizon).sample(rng, track_sigma_bar)


# ---------------------------------------------------------------------------
# Гистограмма совместного закона
# ---------------------------------------------------------------------------

@dataclass
class JointHistogram:
    """
    Частоты по ячейкам (X̄_τ, X̄_τ - X_τ, J_σ̄, J_τ-)

    counts имеет форму (число x-ячеек, число w-ячеек, n, n); пути вне сетки
    учитываются в overflow.
    """

    x_edges: np.ndarray
    w_edges: np.ndarray
    counts: np.ndarray
    overflow: int
    sup_phase_counts: np.ndarray
    end_phase_counts: np.ndarray
    taus: np.ndarray
    sups: np.ndarray
    n_paths: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def standard_errors(self) -> np.ndarray:
        """Биномиальные стандартные ошибки частот ячеек"""
        p = self.frequencies
        return np.sqrt(p * (1.0 - p) / self.n_paths)

    @property
    def overflow_mass(self) -> float:
        return self.overflow / self.n_paths

    @property
    def phase_at_sup_frequencies(self) -> np.ndarray:
        return self.sup_phase_counts / self.n_paths

    @property
    def phase_at_end_frequencies(self) -> np.ndarray:
        return self.end_phase_counts / self.n_paths

    @staticmethod
    def phase_standard_errors(frequencies: np.ndarray, n_paths: int) -> np.ndarray:
        return np.sqrt(frequencies * (1.0 - frequencies) / n_paths)


def _bin(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Номер ячейки или -1 вне [edges[0], edges[-1])"""
    index = np.searchsorted(edges, values, side='right') - 1
    index[(values < edges[0]) | (values >= edges[-1])] = -1
    return index


def _simulate_chunk(model: JumpDiffusionModel, horizon: PhaseTypeRep, cfg: SimConfig,
                    first: int, last: int):
    """Пути с номерами [first, last): целочисленные счётчики и выборки"""
    simulator = _PathSimulator(model, horizon)
    size = last - first
    sups = np.empty(size)
    ends = np.empty(size)
    taus = np.empty(size)
    at_sup = np.empty(size, dtype=np.int64)
    at_end = np.empty(size, dtype=np.int64)

    for offset, index in enumerate(range(first, last)):
        path = simulator.sample(path_rng(cfg.seed, index), cfg.track_sigma_bar)
        sups[offset], ends[offset], taus[offset] = path.sup, path.x_tau, path.tau
        at_sup[offset], at_end[offset] = path.phase_at_sup, path.phase_at_end

    n = horizon.n
    nx, nw = cfg.bin_edges_x.size - 1, cfg.bin_edges_y.size - 1
    xi = _bin(sups, cfg.bin_edges_x)
    wi = _bin(sups - ends, cfg.bin_edges_y)
    inside = (xi >= 0) & (wi >= 0)

    counts = np.zeros((nx, nw, n, n), dtype=np.int64)
    np.add.at(counts, (xi[inside], wi[inside], at_sup[inside], at_end[inside]), 1)
    return (counts, int(size - inside.sum()),
            np.bincount(at_sup, minlength=n), np.bincount(at_end, minlength=n),
            taus, sups)


def estimate_joint(model: JumpDiffusionModel, horizon: PhaseTypeRep, cfg: SimConfig,
                   threads: int = 1, chunk_size: Optional[int] = None) -> JointHistogram:
    """
    Гистограмма совместного закона по cfg.n_paths путям

    Результат не зависит от threads и chunk_size.

    Args:
        model: Модель
        horizon: PH-горизонт
        cfg: Параметры симуляции
        threads: Число процессов
        chunk_size: Путей на порцию (по умолчанию Config.MC_CHUNK_SIZE)

    Returns:
        Гистограмма с частотами и стандартными ошибками
    """
    validate_model(model)
    validate(horizon)
    if threads < 1:
        raise DomainError(f"threads должно быть >= 1, получено {threads!r}")
    chunk_size = chunk_size or Config.MC_CHUNK_SIZE
    bounds = [(first, min(first + chunk_size, cfg.n_paths))
              for first in range(0, cfg.n_paths, chunk_size)]

    logger.info(f"🚀 Симуляция: {cfg.n_paths} путей, {len(bounds)} порций, процессов: {threads}")
    if threads == 1:
        parts = [_simulate_chunk(model, horizon, cfg, first, last) for first, last in bounds]
    else:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(_simulate_chunk, model, horizon, cfg, first, last)
                       for first, last in bounds]
            parts = [future.result() for future in futures]

    histogram = JointHistogram(
        x_edges=cfg.bin_edges_x,
        w_edges=cfg.bin_edges_y,
        counts=sum(part[0] for part in parts),
        overflow=sum(part[1] for part in parts),
        sup_phase_counts=sum(part[2] for part in parts),
        end_phase_counts=sum(part[3] for part in parts),
        taus=np.concatenate([part[4] for part in parts]),
        sups=np.concatenate([part[5] for part in parts]),
        n_paths=cfg.n_paths,
    )
    logger.info(f"✅ Симуляция завершена, вне сетки: {histogram.overflow_mass:.4%}")
    return histogram


def tau_ks_test(taus: np.ndarray, horizon: PhaseTypeRep):
    """Критерий Колмогорова-Смирнова для τ против PH-функции распределения"""
    return stats.kstest(taus, lambda x: cdf(horizon, x))
