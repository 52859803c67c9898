"""
Группа аналитических команд: reverse, factorize, density, bm-erlang
"""

import logging
from typing import Optional

from bm_erlang import compute_weights, inf_density_erlang, joint_density_erlang, sup_density_erlang
from cli import CommandGroup, command
from factorization import build_tables, joint_density_grid, total_mass
from ph_core import laplace, reverse_general, reverse_standard, reverse_stationary
from run_config import RunConfig
from utils import ConfigError, write_csv, write_csv_blocks

logger = logging.getLogger(__name__)


def tables_for(config: RunConfig, delta: Optional[float] = None):
    """Таблицы факторизации по конфигурации запуска"""
    return build_tables(
        config.model,
        config.horizon,
        delta=config.delta if delta is None else delta,
        reversal=config.reversal,
        alpha_hat=config.alpha_hat,
    )


class AnalysisCommands(CommandGroup):
    """Обращение времени, факторизация и плотности"""

    @command('reverse', help='Обращение времени горизонта')
    def reverse(self, config: RunConfig) -> int:
        if config.reversal == 'general':
            result = reverse_general(config.horizon, config.alpha_hat)
        elif config.reversal == 'stationary':
            result = reverse_stationary(config.horizon)
        else:
            result = reverse_standard(config.horizon)

        path = write_csv_blocks(config.output / 'reverse.csv', [
            ('alpha_star', [result.alpha_star]),
            ('T_star', result.T_star),
        ])
        logger.info(f"📄 {path}")
        return 0

    @command('factorize', help='Константы c, r и генераторы U, U*')
    def factorize(self, config: RunConfig) -> int:
        tables = tables_for(config)
        n = tables.n
        rows = [(k, tables.c[k], tables.r[k], tables.up.u[k], tables.down.u[k]) for k in range(n)]
        write_csv(config.output / 'constants.csv', ('k', 'c', 'r', 'u', 'u_star'), rows)

        header = [f'c{j}' for j in range(tables.up.r)]
        write_csv(config.output / 'U.csv', header, tables.up.U)
        header = [f'c{j}' for j in range(tables.down.r)]
        write_csv(config.output / 'U_star.csv', header, tables.down.U)
        logger.info(f"📄 constants.csv, U.csv, U_star.csv (U: {tables.up.method}, U*: {tables.down.method})")
        return 0

    @command('density', help='Совместная плотность на сетке')
    def density(self, config: RunConfig) -> int:
        tables = tables_for(config)
        rows = joint_density_grid(tables, config.x_grid, config.y_grid)
        write_csv(config.output / 'density.csv', ('x', 'y', 'k', 'j', 'value'), rows)

        summary = [(config.delta, total_mass(tables, method='closed'),
                    laplace(config.horizon, config.delta))]
        write_csv(config.output / 'density_summary.csv', ('delta', 'total_mass', 'laplace'), summary)
        logger.info(f"📄 density.csv ({len(rows)} строк), density_summary.csv")
        return 0

    @command('bm-erlang', help='Явные формулы для BM на горизонте Эрланга')
    def bm_erlang(self, config: RunConfig) -> int:
        model = config.model
        if model.lam_plus or model.lam_minus:
            raise ConfigError('model', "команда bm-erlang требует модель без скачков")
        n = config.erlang_stages
        if n is None:
            raise ConfigError('horizon.kind', "команда bm-erlang требует kind = erlang или exponential")

        w = compute_weights(n, config.erlang_rate, model.mu, model.sigma2)
        weights = [(i, k, w.p_bar[i, k], w.p_under[i, k])
                   for k in range(1, n + 1) for i in range(1, k + 1)]
        write_csv(config.output / 'bm_erlang_weights.csv', ('i', 'k', 'p_bar', 'p_under'), weights)

        xs = [float(x) for x in config.x_grid if x > 0]
        densities = [(x, k, sup_density_erlang(w, x, k), inf_density_erlang(w, x, k))
                     for x in xs for k in range(1, n + 1)]
        write_csv(config.output / 'bm_erlang_density.csv', ('x', 'k', 'sup', 'inf'), densities)

        joint = [(x, y, k, joint_density_erlang(w, x, y, k))
                 for x in xs for y in xs for k in range(1, n + 1)]
        write_csv(config.output / 'bm_erlang_joint.csv', ('x', 'w', 'k', 'value'), joint)
        logger.info(f"📄 bm_erlang_*.csv (n={n}, λ₊={w.lam_plus:.6g}, λ₋={w.lam_minus:.6g})")
        return 0


def setup(app):
    """Регистрация группы"""
    app.add_group(AnalysisCommands(app))
