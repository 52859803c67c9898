"""
Конфигурация процесса (логирование и планирование симуляций)
"""

import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Класс конфигурации процесса"""

    # Логирование
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', '')  # пусто = без файла

    # Монте-Карло: сколько траекторий в одной порции для воркера.
    # На результат не влияет (у каждой траектории свой поток случайных чисел)
    MC_CHUNK_SIZE = int(os.getenv('MC_CHUNK_SIZE', '4096'))

    # Значения по умолчанию для флагов CLI
    DEFAULT_OUTPUT_DIR = './out'
    DEFAULT_THREADS = 1

    @classmethod
    def validate(cls):
        """Проверка конфигурации"""
        if cls.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            raise ValueError(f"LOG_LEVEL имеет неизвестное значение: {cls.LOG_LEVEL}")

        if cls.MC_CHUNK_SIZE < 1:
            raise ValueError("MC_CHUNK_SIZE должен быть больше 0")

        return True
