"""
Утилиты: логирование, иерархия ошибок, запись CSV
"""

import csv
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from config import Config


_LOGGING_CONFIGURED = False


def setup_logging():
    """Настройка системы логирования"""
    global _LOGGING_CONFIGURED
    if _LOGGING_CONFIGURED:
        return

    # Создаем форматтер
    formatter = logging.Formatter(
        '%(asctime)s | %(levelname)-8s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # Консольный handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(getattr(logging, Config.LOG_LEVEL.upper()))

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    root_logger.addHandler(console_handler)

    # Файловый handler (только если задан файл)
    if Config.LOG_FILE:
        file_handler = logging.FileHandler(Config.LOG_FILE, encoding='utf-8')
        file_handler.setFormatter(formatter)
        file_handler.setLevel(logging.DEBUG)
        root_logger.addHandler(file_handler)

    _LOGGING_CONFIGURED = True


# ---------------------------------------------------------------------------
# Ошибки
# ---------------------------------------------------------------------------

class FactorizationError(Exception):
    """Базовая численная ошибка (код выхода 1)"""


class PhaseTypeError(FactorizationError):
    """Некорректное PH-представление"""


class NotSubGenerator(PhaseTypeError):
    """Нарушена знаковая структура субгенератора или размерности"""


class NotDistribution(PhaseTypeError):
    """Начальный вектор не является вероятностным"""


class Reducible(PhaseTypeError):
    """Матрица T + t·alpha (или T + Δ_t) не является неразложимой"""


class Singular(PhaseTypeError):
    """Матрица T численно вырождена"""


class InvalidModel(FactorizationError):
    """Нарушены инварианты модели скачкообразной диффузии"""


class PassageError(FactorizationError):
    """Ошибка вычисления генератора первого прохождения"""


class DefectiveSpectrum(PassageError):
    """Спектр не позволяет восстановить U (число корней, обусловленность)"""


class NoUpPhases(PassageError):
    """Нет фаз, из которых возможен подъём"""


class InconsistentR(FactorizationError):
    """Две формулы для r_k расходятся"""


class IndexOutOfRange(FactorizationError):
    """Индекс фазы вне допустимого диапазона"""


class DomainError(FactorizationError):
    """Аргумент вне области определения операции"""


class ConfigError(ValueError):
    """Ошибка конфигурации запуска (код выхода 2)"""

    def __init__(self, key: str, message: str):
        super().__init__(f"[{key}] {message}")
        self.key = key


def error_handler(error: Exception) -> int:
    """
    Централизованная обработка ошибок

    Args:
        error: Ошибка

    Returns:
        Код выхода процесса
    """
    logger = logging.getLogger(__name__)

    # Ошибка конфигурации
    if isinstance(error, ConfigError):
        logger.error(f"❌ Ошибка конфигурации: {error}")
        return 2

    # Численная ошибка модулей - сообщение без изменений
    if isinstance(error, FactorizationError):
        logger.error(f"❌ {type(error).__name__}: {error}")
        return 1

    # Остальные ошибки
    logger.error(f"❌ Непредвиденная ошибка: {error}", exc_info=error)
    return 1


# ---------------------------------------------------------------------------
# Форматирование и CSV
# ---------------------------------------------------------------------------

def format_float(value: float) -> str:
    """
    Кратчайшее представление float, восстанавливаемое без потерь

    Args:
        value: Число

    Returns:
        Строка (не более 17 значащих цифр, точка как разделитель)
    """
    return repr(float(value))


def format_cell(value) -> str:
    """Форматирование ячейки CSV"""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """
    Запись таблицы в CSV

    Args:
        path: Путь к файлу
        header: Заголовок
        rows: Строки значений

    Returns:
        Путь к записанному файлу
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def write_csv_blocks(path: Path, blocks: List[tuple]) -> Path:
    """
    Запись нескольких помеченных блоков в один CSV

    Args:
        path: Путь к файлу
        blocks: Список (метка, строки)

    Returns:
        Путь к записанному файлу
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        for label, rows in blocks:
            writer.writerow([label])
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
    return path


def format_duration(seconds: float) -> str:
    """
    Форматирование длительности

    Args:
        seconds: Количество секунд

    Returns:
        Форматированная строка
    """
    minutes, seconds = divmod(float(seconds), 60)
    if minutes >= 1:
        return f"{int(minutes)}м {seconds:.1f}с"
    return f"{seconds:.2f}с"
