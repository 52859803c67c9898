"""
Отчёт о проверках: накопление именованных проверок с допусками и экспорт
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from utils import format_float, write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    """Одна проверка: наблюдаемое отклонение против допуска"""

    name: str
    tolerance: float
    observed: float
    passed: bool

    @property
    def status(self) -> str:
        return 'pass' if self.passed else 'fail'


class VerificationReport:
    """Набор проверок одного запуска"""

    def __init__(self, title: str = 'verify'):
        """
        Args:
            title: Заголовок текстового отчёта
        """
        self.title = title
        self.checks: List[Check] = []

    def add_check(self, name: str, tolerance: float, observed: float,
                  higher_is_better: bool = False) -> Check:
        """
        Добавление проверки

        Args:
            name: Имя проверки
            tolerance: Допуск (верхняя граница отклонения или нижняя граница доли)
            observed: Наблюдаемое значение
            higher_is_better: Проверка вида observed >= tolerance

        Returns:
            Добавленная проверка
        """
        observed = float(observed)
        if higher_is_better:
            passed = observed >= tolerance
        else:
            passed = bool(np.isfinite(observed)) and observed <= tolerance
        check = Check(name=name, tolerance=float(tolerance), observed=observed, passed=passed)
        self.checks.append(check)

        log = logger.info if check.passed else logger.warning
        marker = '✅' if check.passed else '⚠️'
        log(f"{marker} {name}: {observed:.3e} (допуск {tolerance:.1e})")
        return check

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get_summary(self) -> Dict[str, int]:
        """Статистика по проверкам"""
        passed = sum(check.passed for check in self.checks)
        return {
            'total': len(self.checks),
            'passed': passed,
            'failed': len(self.checks) - passed,
        }

    def render(self) -> str:
        """Текстовое представление (детерминированное, без отметок времени)"""
        width = max((len(check.name) for check in self.checks), default=10)
        lines = [f"# {self.title}", '']
        for check in self.checks:
            lines.append(
                f"{check.status.upper():4}  {check.name:<{width}}  "
                f"observed={format_float(check.observed)}  tolerance={format_float(check.tolerance)}"
            )
        summary = self.get_summary()
        lines.append('')
        lines.append(f"{summary['passed']}/{summary['total']} passed, {summary['failed']} failed")
        return '\n'.join(lines) + '\n'

    def export(self, output_dir: Path) -> List[Path]:
        """
        Запись verify_report.csv и verify_report.txt

        Args:
            output_dir: Каталог результатов

        Returns:
            Пути к записанным файлам
        """
        output_dir = Path(output_dir)
        csv_path = write_csv(
            output_dir / 'verify_report.csv',
            ('check', 'tolerance', 'observed', 'status'),
            ((c.name, c.tolerance, c.observed, c.status) for c in self.checks),
        )
        text_path = output_dir / 'verify_report.txt'
        text_path.write_text(self.render(), encoding='utf-8')
        return [csv_path, text_path]
