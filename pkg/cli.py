"""
Пакетный интерфейс: разбор аргументов, загрузка групп команд и запуск
"""

import argparse
import importlib
import inspect
import logging
import sys
import time
from typing import Callable, Dict, List, Optional

from config import Config
from run_config import COMMANDS, RunConfig, load_run_config
from utils import ConfigError, error_handler, format_duration, setup_logging

logger = logging.getLogger(__name__)

EXTENSIONS = (
    'commands.analysis_commands',
    'commands.simulation_commands',
    'commands.verification_commands',
)


def command(name: str, help: str = ''):
    """Пометка метода группы как команды"""
    def decorator(func: Callable) -> Callable:
        func.__command_name__ = name
        func.__command_help__ = help
        return func
    return decorator


class CommandGroup:
    """Базовый класс группы команд"""

    def __init__(self, app: 'FactorizationApp'):
        self.app = app

    def get_commands(self) -> Dict[str, Callable]:
        return {
            method.__command_name__: method
            for _, method in inspect.getmembers(self, predicate=inspect.ismethod)
            if hasattr(method, '__command_name__')
        }


class FactorizationApp:
    """Реестр команд и диспетчер"""

    def __init__(self):
        self.commands: Dict[str, Callable[[RunConfig], int]] = {}
        self.groups: List[CommandGroup] = []

    def add_group(self, group: CommandGroup):
        """Регистрация всех команд группы"""
        for name, handler in group.get_commands().items():
            if name in self.commands:
                raise ValueError(f"Команда {name} уже зарегистрирована")
            self.commands[name] = handler
        self.groups.append(group)
        logger.debug(f"Группа {type(group).__name__}: {sorted(group.get_commands())}")

    def load_extension(self, module_name: str):
        """Импорт модуля команд и вызов его setup(app)"""
        module = importlib.import_module(module_name)
        module.setup(self)

    def setup_hook(self):
        """Загрузка всех групп команд"""
        for extension in EXTENSIONS:
            self.load_extension(extension)
        missing = set(COMMANDS) - set(self.commands)
        if missing:
            raise ValueError(f"Нет обработчиков для команд: {sorted(missing)}")

    def dispatch(self, config: RunConfig) -> int:
        """
        Выполнение команды из конфигурации

        Returns:
            Код выхода
        """
        handler = self.commands[config.command]
        started = time.perf_counter()
        logger.info(f"🚀 Команда {config.command}, результаты в {config.output}")
        config.output.mkdir(parents=True, exist_ok=True)
        status = handler(config)
        logger.info(f"✅ Команда {config.command} завершена за "
                    f"{format_duration(time.perf_counter() - started)} (код {status})")
        return status


def run(config: RunConfig) -> int:
    """
    Запуск команды с централизованной обработкой ошибок

    Args:
        config: Конфигурация запуска

    Returns:
        0 при успехе (для verify - если все проверки пройдены), 1 при численной ошибке
    """
    app = FactorizationApp()
    app.setup_hook()
    try:
        return app.dispatch(config)
    except Exception as e:
        return error_handler(e)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ph-wh',
        description='Факторизация Винера-Хопфа на PH-горизонте',
    )
    parser.add_argument('--config', required=True, help='Путь к INI-файлу запуска')
    parser.add_argument('--output', default=Config.DEFAULT_OUTPUT_DIR,
                        help='Каталог результатов (по умолчанию ./out)')
    parser.add_argument('--threads', type=int, default=Config.DEFAULT_THREADS,
                        help='Число процессов Монте-Карло')
    parser.add_argument('--seed', type=int, default=None,
                        help='Переопределяет seed из [run]')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа командной строки"""
    try:
        Config.validate()
    except ValueError as e:
        return error_handler(ConfigError('env', str(e)))
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config, output=args.output,
                                 threads=args.threads, seed=args.seed)
    except Exception as e:
        return error_handler(e)
    return run(config)


if __name__ == '__main__':
    sys.exit(main())
