"""
Конфигурация запуска: разбор INI-файла с секциями [model], [horizon], [run]

Матрицы задаются в строку, строки разделяются ';', элементы - запятыми или
пробелами. Сетки - явный список или сокращение start:stop:count.
"""

import configparser
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from config import Config
from fluid_embedding import JumpDiffusionModel, validate_model
from mc_oracle import SimConfig
from ph_core import PhaseTypeRep, coxian, erlang, exponential, validate
from utils import ConfigError, FactorizationError

logger = logging.getLogger(__name__)

COMMANDS = ('reverse', 'factorize', 'density', 'bm-erlang', 'simulate', 'verify')
REVERSALS = ('standard', 'general', 'stationary')
HORIZON_KINDS = ('erlang', 'exponential', 'coxian', 'matrix')

_SEPARATOR = re.compile(r'[,\s]+')


@dataclass(frozen=True)
class RunConfig:
    """Разобранная конфигурация одного запуска"""

    command: str
    model: JumpDiffusionModel
    horizon: PhaseTypeRep
    horizon_kind: str
    delta: float
    reversal: str
    alpha_hat: Optional[np.ndarray]
    x_grid: np.ndarray
    y_grid: np.ndarray
    sim: Optional[SimConfig]
    output: Path
    threads: int = Config.DEFAULT_THREADS

    @property
    def erlang_stages(self) -> Optional[int]:
        """Число стадий, если горизонт - Эрланг (экспонента - одна стадия)"""
        if self.horizon_kind in ('erlang', 'exponential'):
            return self.horizon.n
        return None

    @property
    def erlang_rate(self) -> Optional[float]:
        if self.erlang_stages is None:
            return None
        return float(-self.horizon.T[0, 0])


# ---------------------------------------------------------------------------
# Разбор значений
# ---------------------------------------------------------------------------

def parse_vector(text: str, key: str) -> np.ndarray:
    """Вектор из строки '0.5, 0.5' или '0.5 0.5'"""
    try:
        items = [s for s in _SEPARATOR.split(text.strip()) if s]
        values = np.array([float(s) for s in items])
    except ValueError as e:
        raise ConfigError(key, f"ожидался список чисел, получено {text!r}") from e
    if values.size == 0:
        raise ConfigError(key, "пустой список")
    return values


def parse_matrix(text: str, key: str) -> np.ndarray:
    """Матрица из строки '-1 1; 0 -2'"""
    rows = [parse_vector(row, key) for row in text.split(';') if row.strip()]
    if not rows or any(row.size != len(rows) for row in rows):
        raise ConfigError(key, f"ожидалась квадратная матрица, получено {text!r}")
    return np.vstack(rows)


def parse_grid(text: str, key: str) -> np.ndarray:
    """Сетка: 'start:stop:count' или явный список; строго возрастающая"""
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise ConfigError(key, f"ожидалось start:stop:count, получено {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as e:
            raise ConfigError(key, f"некорректная сетка {text!r}") from e
        if count < 1:
            raise ConfigError(key, "count должно быть >= 1")
        grid = np.linspace(start, stop, count)
    else:
        grid = parse_vector(text, key)
    if np.any(np.diff(grid) <= 0):
        raise ConfigError(key, "сетка должна строго возрастать")
    return grid


def _get(section: configparser.SectionProxy, key: str, fallback=None) -> Optional[str]:
    value = section.get(key, fallback=fallback)
    if value is None:
        raise ConfigError(f"{section.name}.{key}", "обязательный ключ отсутствует")
    return value


def _float(section: configparser.SectionProxy, key: str, fallback=None) -> float:
    value = _get(section, key, None if fallback is None else str(fallback))
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"{section.name}.{key}", f"ожидалось число, получено {value!r}") from e


def _int(section: configparser.SectionProxy, key: str, fallback=None) -> int:
    value = _get(section, key, None if fallback is None else str(fallback))
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{section.name}.{key}", f"ожидалось целое, получено {value!r}") from e


def _section(parser: configparser.ConfigParser, name: str) -> configparser.SectionProxy:
    if not parser.has_section(name):
        raise ConfigError(name, "секция отсутствует")
    return parser[name]


# ---------------------------------------------------------------------------
# Секции
# ---------------------------------------------------------------------------

def _jump_law(section: configparser.SectionProxy, side: str) -> Optional[PhaseTypeRep]:
    rate_key, alpha_key, matrix_key = f'lam_{side}', f'{side}_alpha', f'{side}_T'
    if _float(section, rate_key, 0.0) == 0.0:
        return None
    T = parse_matrix(_get(section, matrix_key), f'model.{matrix_key}')
    alpha = parse_vector(_get(section, alpha_key, '1' if T.shape[0] == 1 else None),
                         f'model.{alpha_key}')
    return PhaseTypeRep(alpha, T)


def parse_model(section: configparser.SectionProxy) -> JumpDiffusionModel:
    """Секция [model]: mu, sigma2, lam_plus/plus_alpha/plus_T, lam_minus/minus_alpha/minus_T"""
    try:
        model = JumpDiffusionModel(
            mu=_float(section, 'mu', 0.0),
            sigma2=_float(section, 'sigma2'),
            lam_plus=_float(section, 'lam_plus', 0.0),
            ph_plus=_jump_law(section, 'plus'),
            lam_minus=_float(section, 'lam_minus', 0.0),
            ph_minus=_jump_law(section, 'minus'),
        )
        return validate_model(model)
    except FactorizationError as e:
        raise ConfigError('model', str(e)) from e


def parse_horizon(section: configparser.SectionProxy):
    """
    Секция [horizon]

    Returns:
        (PhaseTypeRep, вид горизонта)
    """
    kind = _get(section, 'kind', 'matrix').strip().lower()
    if kind not in HORIZON_KINDS:
        raise ConfigError('horizon.kind', f"ожидалось одно из {HORIZON_KINDS}, получено {kind!r}")
    try:
        if kind == 'exponential':
            rep = exponential(_float(section, 'rate'))
        elif kind == 'erlang':
            rep = erlang(_int(section, 'n'), _float(section, 'rate'))
        elif kind == 'coxian':
            rates = parse_vector(_get(section, 'rates'), 'horizon.rates')
            exit_probs = parse_vector(_get(section, 'exit_probs'), 'horizon.exit_probs')
            alpha = section.get('alpha')
            rep = coxian(rates, exit_probs,
                         None if alpha is None else parse_vector(alpha, 'horizon.alpha'))
        else:
            T = parse_matrix(_get(section, 'T'), 'horizon.T')
            rep = PhaseTypeRep(parse_vector(_get(section, 'alpha'), 'horizon.alpha'), T)
        return validate(rep), kind
    except FactorizationError as e:
        raise ConfigError('horizon', str(e)) from e


def _sim_config(section: configparser.SectionProxy, seed: Optional[int]) -> Optional[SimConfig]:
    if 'n_paths' not in section:
        return None
    seed = _int(section, 'seed', 0) if seed is None else seed
    if not 0 <= seed < 2 ** 128:
        raise ConfigError('run.seed', f"должен лежать в [0, 2^128), получено {seed!r}")
    n_paths = _int(section, 'n_paths')
    if n_paths < 1:
        raise ConfigError('run.n_paths', f"должно быть >= 1, получено {n_paths!r}")
    try:
        return SimConfig(
            seed=seed,
            n_paths=n_paths,
            bin_edges_x=parse_grid(_get(section, 'bin_edges_x', '0:5:11'), 'run.bin_edges_x'),
            bin_edges_y=parse_grid(_get(section, 'bin_edges_y', '0:5:11'), 'run.bin_edges_y'),
            track_sigma_bar=section.getboolean('track_sigma_bar', fallback=False),
        )
    except FactorizationError as e:
        raise ConfigError('run.bin_edges', str(e)) from e


def load_run_config(path, output=None, threads: int = Config.DEFAULT_THREADS,
                    seed: Optional[int] = None) -> RunConfig:
    """
    Загрузка конфигурации запуска

    Args:
        path: Путь к INI-файлу
        output: Каталог результатов (по умолчанию Config.DEFAULT_OUTPUT_DIR)
        threads: Число процессов для Монте-Карло
        seed: Переопределение [run] seed

    Returns:
        Конфигурация запуска
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError('config', f"файл не найден: {path}")

    # Ключи чувствительны к регистру (T и t различаются)
    parser = configparser.ConfigParser(inline_comment_prefixes=('#',))
    parser.optionxform = str
    try:
        parser.read(path, encoding='utf-8')
    except configparser.Error as e:
        raise ConfigError('config', f"ошибка разбора: {e}") from e

    run = _section(parser, 'run')
    command = _get(run, 'command').strip()
    if command not in COMMANDS:
        raise ConfigError('run.command', f"ожидалось одно из {COMMANDS}, получено {command!r}")

    reversal = _get(run, 'reversal', 'standard').strip()
    if reversal not in REVERSALS:
        raise ConfigError('run.reversal', f"ожидалось одно из {REVERSALS}, получено {reversal!r}")
    alpha_hat = run.get('alpha_hat')
    if reversal == 'general' and alpha_hat is None:
        raise ConfigError('run.alpha_hat', "обязателен для reversal = general")

    delta = _float(run, 'delta', 0.0)
    if delta < 0:
        raise ConfigError('run.delta', f"должна быть неотрицательной, получено {delta!r}")
    if threads < 1:
        raise ConfigError('threads', f"должно быть >= 1, получено {threads!r}")

    horizon, kind = parse_horizon(_section(parser, 'horizon'))
    config = RunConfig(
        command=command,
        model=parse_model(_section(parser, 'model')),
        horizon=horizon,
        horizon_kind=kind,
        delta=delta,
        reversal=reversal,
        alpha_hat=None if alpha_hat is None else parse_vector(alpha_hat, 'run.alpha_hat'),
        x_grid=parse_grid(_get(run, 'x_grid', '0.25:5:20'), 'run.x_grid'),
        y_grid=parse_grid(_get(run, 'y_grid', '-5:4.75:20'), 'run.y_grid'),
        sim=_sim_config(run, seed),
        output=Path(output or Config.DEFAULT_OUTPUT_DIR),
        threads=threads,
    )
    if command == 'simulate' and config.sim is None:
        raise ConfigError('run.n_paths', "обязателен для команды simulate")

    logger.debug(f"Конфигурация {path}: команда {command}, горизонт {kind} (n={horizon.n})")
    return config
