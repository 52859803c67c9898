#!/usr/bin/env python3
"""
Скрипт запуска с проверками окружения
"""

import os
import sys

# Добавляем текущую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def check_requirements():
    """Проверка установленных зависимостей"""
    missing = []

    try:
        import numpy
    except ImportError:
        missing.append('numpy')

    try:
        import scipy
    except ImportError:
        missing.append('scipy')

    try:
        from dotenv import load_dotenv
    except ImportError:
        missing.append('python-dotenv')

    if missing:
        print("❌ Отсутствуют зависимости:", file=sys.stderr)
        for pkg in missing:
            print(f"   - {pkg}", file=sys.stderr)
        print(f"\nУстановите их командой:\n   pip install {' '.join(missing)}", file=sys.stderr)
        return False

    return True


def check_config():
    """Проверка настроек окружения (.env)"""
    from config import Config

    try:
        Config.validate()
        return True
    except ValueError as e:
        print(f"❌ Ошибка конфигурации: {e}", file=sys.stderr)
        print("\nПроверьте файл .env (см. env_example.txt)", file=sys.stderr)
        return False


def main_wrapper():
    """Обертка для запуска с проверками"""
    if not check_requirements():
        sys.exit(1)
    if not check_config():
        sys.exit(2)

    from cli import main

    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n⚠️  Прервано пользователем", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main_wrapper()
