"""
Группа проверок: verify

Сверяет части факторизации друг с другом, с явными формулами (одна фаза,
BM на горизонте Эрланга) и, если в [run] задан n_paths, с Монте-Карло.
"""

import logging

import numpy as np

from bm_erlang import (
    compute_weights,
    inf_density_erlang,
    joint_density_erlang,
    lambda_pm,
    phase_at_sup_erlang,
    sup_density_erlang,
)
from cli import CommandGroup, command
from commands.analysis_commands import tables_for
from factorization import (
    FactorizationTables,
    build_tables,
    cell_probabilities,
    conditional_inf_density,
    inf_density,
    joint_density,
    marginal_sup_from_joint,
    phase_at_end_distribution,
    sup_density,
    total_mass,
)
from mc_oracle import estimate_joint, tau_ks_test
from ph_core import cdf, laplace, reverse_standard
from run_config import RunConfig
from utils import DomainError
from verification_report import VerificationReport

logger = logging.getLogger(__name__)

DISCOUNT_RATES = (0.05, 0.5)
MC_MIN_EXPECTED = 25
MC_Z = 4.0


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


class VerificationCommands(CommandGroup):
    """Проверки согласованности и сверка с оракулами"""

    @command('verify', help='Отчёт о проверках; код 0, если все пройдены')
    def verify(self, config: RunConfig) -> int:
        horizon = config.horizon
        report = VerificationReport(title=f"verify: horizon {config.horizon_kind}, n={horizon.n}")

        self.check_reversal(report, config)
        # Тождество факторизации проверяется при α̂ = α
        tables = build_tables(config.model, horizon)
        self.check_factorization(report, tables)
        self.check_discounting(report, config)
        self.check_reversal_invariance(report, config, tables)

        model = config.model
        pure_bm = not (model.lam_plus or model.lam_minus)
        if pure_bm and horizon.n == 1:
            self.check_exponential(report, config, tables)
        if pure_bm and config.erlang_stages is not None:
            self.check_bm_erlang(report, config, tables)
        if config.sim is not None:
            self.check_monte_carlo(report, config, tables)

        report.export(config.output)
        summary = report.get_summary()
        logger.info(f"📋 Проверки: {summary['passed']}/{summary['total']} пройдено")
        return 0 if report.all_passed else 1

    # -----------------------------------------------------------------------

    def check_reversal(self, report: VerificationReport, config: RunConfig):
        """Инволюция, равенство функций распределения и структура нулей"""
        horizon = config.horizon
        once = reverse_standard(horizon)
        twice = reverse_standard(once.as_rep())

        scale = max(1.0, float(np.max(np.abs(horizon.T))))
        involution = max(np.max(np.abs(twice.alpha_star - horizon.alpha)),
                         np.max(np.abs(twice.T_star - horizon.T)) / scale)
        report.add_check('reversal_involution', 1e-12, involution)

        xs = np.linspace(0.0, 5.0 * horizon.mean, 20)
        report.add_check('reversal_cdf', 1e-10,
                         np.max(np.abs(cdf(horizon, xs) - cdf(once.as_rep(), xs))))

        positive = lambda a: np.asarray(a) > 1e-14
        violations = (
            np.sum(positive(once.alpha_star) != positive(horizon.t))
            + np.sum(positive(once.t_star) != positive(horizon.alpha))
            + np.sum(positive(once.T_star) != positive(horizon.T.T))
        )
        report.add_check('reversal_sparsity', 0, violations)

    def check_factorization(self, report: VerificationReport, tables: FactorizationTables):
        """Две формы r, нормировки, тождество факторизации, маргинализация"""
        n = tables.n
        mask = tables.r != 0
        r_gap = max((_relative(a, b) for a, b in zip(tables.r[mask], tables.r_alt[mask])), default=0.0)
        report.add_check('r_two_forms', 1e-8, r_gap)
        report.add_check('phase_at_sup_sum', 1e-8, abs(float(np.sum(tables.c)) - 1.0))
        report.add_check('total_mass_closed', 1e-6, abs(total_mass(tables, 'closed') - 1.0))
        report.add_check('total_mass_quadrature', 1e-6, abs(total_mass(tables, 'quadrature') - 1.0))

        alpha_star = tables.alpha_star_ext
        identity = 0.0
        for x in (0.5, 1.0, 2.0):
            for y in (-1.0, 0.0, 0.5 * x):
                for k in range(n):
                    if tables.c[k] == 0:
                        continue
                    for j in range(n):
                        lhs = joint_density(tables, None, x, y, k, j)
                        rhs = (sup_density(tables, None, x, k) * inf_density(tables, j, y - x, k)
                               * alpha_star[j] / tables.c[k])
                        if lhs or rhs:
                            identity = max(identity, _relative(lhs, rhs))
        report.add_check('factorization_identity', 1e-10, identity)

        marginal = 0.0
        for x in (0.5, 1.5):
            for k in range(n):
                marginal = max(marginal, abs(marginal_sup_from_joint(tables, None, x, k)
                                             - sup_density(tables, None, x, k)))
        report.add_check('marginalization', 1e-6, marginal)

    def check_discounting(self, report: VerificationReport, config: RunConfig):
        """Масса дисконтированной плотности равна E e^{-δτ}"""
        for delta in DISCOUNT_RATES:
            tables = tables_for(config, delta=delta)
            gap = abs(total_mass(tables, 'closed') - laplace(config.horizon, delta))
            report.add_check(f'discounted_mass_{delta}', 1e-6, gap)

    def check_reversal_invariance(self, report: VerificationReport, config: RunConfig,
                                  tables: FactorizationTables):
        """Условные плотности инфимума и совместная плотность не зависят от α̂"""
        n = tables.n
        uniform = np.full(n, 1.0 / n)
        other = build_tables(config.model, config.horizon, reversal='general', alpha_hat=uniform)

        conditional = 0.0
        for y in np.linspace(-3.0, 0.0, 30):
            for k in range(n):
                try:
                    a = conditional_inf_density(tables, y, k)
                    b = conditional_inf_density(other, y, k)
                except DomainError:
                    continue
                conditional = max(conditional, abs(a - b))
        report.add_check('reversal_invariance_conditional_inf', 1e-8, conditional)

        joint = 0.0
        for x in (0.5, 1.5):
            for y in (-1.0, 0.25):
                for k in range(n):
                    for j in range(n):
                        joint = max(joint, abs(joint_density(tables, None, x, y, k, j)
                                               - joint_density(other, None, x, y, k, j)))
        report.add_check('reversal_invariance_joint', 1e-8, joint)

    def check_exponential(self, report: VerificationReport, config: RunConfig,
                          tables: FactorizationTables):
        """Один экспоненциальный горизонт: λ± и независимость X̄ и X̄ - X"""
        model = config.model
        rate = float(config.horizon.t[0])
        lam_plus, lam_minus = lambda_pm(model.mu, model.sigma2, rate)
        report.add_check('exponential_lambda_plus', 1e-12, _relative(-tables.up.U[0, 0], lam_plus))
        report.add_check('exponential_lambda_minus', 1e-12, _relative(-tables.down.U[0, 0], lam_minus))

        product = 0.0
        for x in (0.25, 1.0, 3.0):
            for y in (-2.0, 0.0, 0.5 * x):
                expected = lam_plus * np.exp(-lam_plus * x) * lam_minus * np.exp(-lam_minus * (x - y))
                product = max(product, _relative(joint_density(tables, None, x, y, 0, 0), expected))
        report.add_check('wh_product_form', 1e-10, product)

    def check_bm_erlang(self, report: VerificationReport, config: RunConfig,
                        tables: FactorizationTables):
        """Сверка матричного метода с рекуррентными весами (стадия k = фаза k-1)"""
        n = tables.n
        model = config.model
        w = compute_weights(n, config.erlang_rate, model.mu, model.sigma2)

        law = phase_at_sup_erlang(w)
        report.add_check('bm_erlang_law_sum', 1e-12, abs(float(np.sum(law)) - 1.0))
        report.add_check('bm_erlang_phase_at_sup', 1e-8, float(np.max(np.abs(law - tables.c[:n]))))

        sup_gap = inf_gap = joint_gap = 0.0
        for x in np.linspace(0.05, 5.0, 50):
            for k in range(1, n + 1):
                sup_gap = max(sup_gap, abs(sup_density(tables, None, x, k - 1)
                                           - sup_density_erlang(w, x, k)))
                # Обращённый Эрланг проходит фазы в обратном порядке: стадия k - фаза n-k
                inf_gap = max(inf_gap, abs(inf_density(tables, None, -x, n - k)
                                           - inf_density_erlang(w, x, k)))
        for x in (0.5, 1.0, 2.5):
            for drawdown in (0.3, 1.0, 2.0):
                for k in range(1, n + 1):
                    matrix = sum(joint_density(tables, None, x, x - drawdown, k - 1, j) for j in range(n))
                    joint_gap = max(joint_gap, abs(matrix - joint_density_erlang(w, x, drawdown, k)))
        report.add_check('bm_erlang_sup_density', 1e-8, sup_gap)
        report.add_check('bm_erlang_inf_density', 1e-8, inf_gap)
        report.add_check('bm_erlang_joint_density', 1e-8, joint_gap)

    def check_monte_carlo(self, report: VerificationReport, config: RunConfig,
                          tables: FactorizationTables):
        """Ячейки гистограммы, законы фаз и τ против аналитики"""
        n = tables.n
        sim = config.sim
        histogram = estimate_joint(config.model, config.horizon, sim, threads=config.threads)
        paths = histogram.n_paths

        expected = cell_probabilities(tables, sim.bin_edges_x, sim.bin_edges_y)
        counted = expected * paths >= MC_MIN_EXPECTED
        se = np.sqrt(expected * (1.0 - expected) / paths)
        within = np.abs(histogram.frequencies - expected) <= MC_Z * se
        if counted.any():
            share = float(np.mean(within[counted]))
        else:
            logger.warning("⚠️ Нет ячеек с ожидаемым числом попаданий >= 25")
            share = 1.0
        report.add_check('mc_cells_within_4se', 0.99, share, higher_is_better=True)

        for name, observed, predicted in (
            ('mc_phase_at_sup', histogram.phase_at_sup_frequencies, tables.c[:n]),
            ('mc_phase_at_end', histogram.phase_at_end_frequencies, phase_at_end_distribution(tables)),
        ):
            spread = histogram.phase_standard_errors(predicted, paths)
            z = np.divide(np.abs(observed - predicted), spread,
                          out=np.zeros(n), where=spread > 0)
            report.add_check(f'{name}_z', MC_Z, float(np.max(z)))

        report.add_check('mc_tau_ks_pvalue', 0.01, tau_ks_test(histogram.taus, config.horizon).pvalue,
                         higher_is_better=True)


def setup(app):
    """Регистрация группы"""
    app.add_group(VerificationCommands(app))
