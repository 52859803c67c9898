"""
Группа команд Монте-Карло: simulate
"""

import logging

from cli import CommandGroup, command
from mc_oracle import estimate_joint
from run_config import RunConfig
from utils import write_csv

logger = logging.getLogger(__name__)


class SimulationCommands(CommandGroup):
    """Симуляция совместного закона"""

    @command('simulate', help='Гистограмма (X̄, X̄ - X, J_σ̄, J_τ-) методом Монте-Карло')
    def simulate(self, config: RunConfig) -> int:
        histogram = estimate_joint(config.model, config.horizon, config.sim, threads=config.threads)
        freq, se = histogram.frequencies, histogram.standard_errors
        x_edges, w_edges = histogram.x_edges, histogram.w_edges
        n = config.horizon.n

        rows = []
        for a in range(x_edges.size - 1):
            for b in range(w_edges.size - 1):
                for k in range(n):
                    for j in range(n):
                        rows.append((x_edges[a], x_edges[a + 1], w_edges[b], w_edges[b + 1],
                                     k, j, freq[a, b, k, j], se[a, b, k, j]))
        write_csv(config.output / 'histogram.csv',
                  ('x_lo', 'x_hi', 'w_lo', 'w_hi', 'k', 'j', 'freq', 'se'), rows)

        at_sup, at_end = histogram.phase_at_sup_frequencies, histogram.phase_at_end_frequencies
        write_csv(config.output / 'phases.csv', ('phase', 'at_sup', 'at_end'),
                  [(k, at_sup[k], at_end[k]) for k in range(n)])
        logger.info(f"📄 histogram.csv ({len(rows)} ячеек), phases.csv")
        return 0


def setup(app):
    """Регистрация группы"""
    app.add_group(SimulationCommands(app))
