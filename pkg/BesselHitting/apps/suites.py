# BesselHitting - first hitting times of Bessel processes
# Copyright (C) 2026 The BesselHitting developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Verification suites run by `besselctl.py verify <suite>`.

identities   exact-law identities and the kappa cancellation (seconds)
asymptotics  tail limits, remainder rates and J(t) against the oracle (minutes)
simulation   samplers and Monte Carlo estimators against exact values (minutes)
oracle       convergence order and closed-form cross-checks of the PDE solver
"""

import dataclasses
import logging
import math

import numpy as np
from scipy import stats

from BesselHitting import closed_form, simulate
from BesselHitting.analysis import (Report, cancellation_scan, fit_rate, identity_residual, iasympt_slope,
                                    j_curve, j_prediction, j_scale, jbound_check, oracle_curve,
                                    reliable_window, remainder)
from BesselHitting.closed_form import MINUS, NU_EQ_1, NU_LT_1, PLUS, LawQuery, regime_of
from BesselHitting.numerics import log_gamma, reg_gamma_q
from BesselHitting.pde_oracle import SurvivalGrid, solve_survival, tail_at

__all__ = ['SUITES', 'run_suite', 'identities', 'asymptotics', 'simulation', 'oracle']

RANDOM_TUPLES = 100

LIMIT_POINTS = ((0.5, 2.0, 1.0), (1.0, 2.0, 1.0), (1.5, 2.0, 1.0))
RATE_NUS = (0.3, 0.4, 0.7, 1.0, 1.5, 2.0)
RATE_A, RATE_B = 2.0, 1.0
RATE_T_MAX = 1e4
# J(t) is compared with its limit here, whatever the reliable window
J_LIMIT_T = 1e4

#
# identities
#

def _density_term(nu, x, t):
    return math.exp(2.0 * nu * math.log(x) - x * x / (2.0 * t) - nu * math.log(2.0 * t) - log_gamma(nu + 1.0))

def identities(config, cache=None):
    report = Report('identities')
    gen = np.random.default_rng(config['seed'])

    for value in closed_form.kappa_forms(0.5):
        report.check('kappa_(1/2) = 2', 'closed_form.kappa_forms', value, 2.0, 1e-9)
    report.extend(cancellation_scan([0.25, 0.5, 0.75]))

    worst = 0.0
    for _ in range(RANDOM_TUPLES):
        nu, x, t = gen.uniform(0.05, 3.0), gen.uniform(0.05, 5.0), gen.uniform(0.05, 50.0)
        residual = closed_form.tau0_tail(nu, x, t) - closed_form.tau0_tail(nu + 1.0, x, t) - _density_term(nu, x, t)
        worst = max(worst, abs(residual))
    report.check('index recursion of P_x(tau_0 > t)', 'closed_form.tau0_tail', worst, 0.0, 1e-12)

    worst = 0.0
    for _ in range(RANDOM_TUPLES):
        c = gen.uniform(0.1, 2.0)
        alpha, beta = gen.uniform(0.1, 0.9), gen.uniform(0.1, 0.9)
        x = c * gen.uniform(1.5, 20.0)
        lhs, rhs = closed_form.convolution_identity_sides(c, alpha, beta, x)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    report.check('convolution integral identity (relative)', 'closed_form.convolution_identity_sides',
                 worst, 0.0, 1e-8)

    worst = 0.0
    for _ in range(RANDOM_TUPLES):
        a = gen.uniform(0.5, 3.0)
        b = a * gen.uniform(0.0, 0.95)
        t = gen.uniform(0.01, 100.0)
        flipped = closed_form.plus_from_minus(0.5, a, b, closed_form.halfindex_minus_tail(a, b, t))
        worst = max(worst, abs(flipped - closed_form.halfindex_exact(a, b, t)))
    report.check('sign flip maps the -1/2 tail onto the +1/2 tail', 'closed_form.plus_from_minus',
                 worst, 0.0, 1e-15)

    worst = 0.0
    for _ in range(RANDOM_TUPLES):
        nu = gen.uniform(0.05, 3.0)
        a = gen.uniform(0.5, 3.0)
        b = a * gen.uniform(0.05, 0.95)
        # keeps P_b(tau_0 <= t) away from zero
        t = b * b / (2.0 * gen.uniform(0.01, 2.0))
        parts = closed_form.i_parts(nu, a, b, t)
        worst = max(worst, abs(parts.I - parts.direct))
    report.check('I1 + I2 + I3 equals the ratio form of I(t)', 'closed_form.i_parts', worst, 0.0, 1e-12)
    return report

#
# asymptotics
#

def _solve(nu, a, b, t_max, n_x, n_t, cache):
    grid = SurvivalGrid.for_query(b, a, t_max, n_x=n_x, n_t=n_t)
    return solve_survival(nu, b, grid, cache=cache)

def _limits(report, nu, a, b, config, cache):
    sol = _solve(nu, a, b, RATE_T_MAX, config['n_x'], config['n_t'], cache)
    t = RATE_T_MAX
    tail = tail_at(sol, a, t)
    c = closed_form.c_const(nu, a, b)
    report.check('t^nu P_a(tau_b > t) -> C_nu at nu=%g, t=%g' % (nu, t), 'closed_form.leading_tail',
                 t ** nu * tail, c, 0.02 * c)

    plus = closed_form.plus_from_minus(nu, a, b, tail)
    factor = (b / a) ** (2.0 * nu)
    report.check('plus-sign tail is (b/a)^(2nu) times the minus-sign tail at nu=%g' % nu,
                 'closed_form.plus_from_minus', plus, factor * tail, 1e-15 * max(tail, 1e-300))
    report.check('t^nu P^(+nu)(t < tau_b < inf) -> (b/a)^(2nu) C_nu at nu=%g' % nu, 'closed_form.leading_tail',
                 t ** nu * plus, factor * c, 0.02 * factor * c)

def _rates(report, nu, config, cache):
    a, b = RATE_A, RATE_B
    times = np.geomspace(1e2, RATE_T_MAX, 21)
    fine_sol = _solve(nu, a, b, RATE_T_MAX, config['n_x'], config['n_t'], cache)
    coarse_sol = _solve(nu, a, b, RATE_T_MAX, config['n_x'] // 2, config['n_t'] // 2, cache)
    fine = oracle_curve(fine_sol, a, times)
    fine_rem = remainder(fine, nu, a, b, MINUS)
    coarse_rem = remainder(oracle_curve(coarse_sol, a, times), nu, a, b, MINUS)
    window = reliable_window(fine_rem, coarse_rem)
    t_end = window[1]
    rem_end = fine_rem.value_at(t_end)
    regime = regime_of(nu)
    prediction = closed_form.expansion(LawQuery.of(nu, MINUS, a, b, t_end))

    if regime == NU_LT_1:
        fit = fit_rate(fine_rem, window)
        report.check('remainder slope -2nu at nu=%g on [%g, %g]' % (nu, window[0], window[1]), 'analysis.fit_rate',
                     fit.slope, -2.0 * nu, config['slope_tolerance'])
        expected = prediction.second_coeff
        report.check('t^(2nu) remainder -> its coefficient at nu=%g, t=%g' % (nu, t_end), 'closed_form.expansion',
                     t_end ** (2.0 * nu) * rem_end, expected, 0.1 * abs(expected))

        jc = j_curve(nu, a, b, [J_LIMIT_T], fine)
        expected = j_prediction(nu, a, b)
        report.check('t^(2nu) J(t) -> its limit at nu=%g, t=%g' % (nu, J_LIMIT_T), 'analysis.j_curve',
                     j_scale(nu, J_LIMIT_T) * jc.points[0].value, expected, 0.05 * abs(expected))
    elif regime == NU_EQ_1:
        expected = prediction.second_coeff
        report.check('(t^2/log t) remainder -> -b^2 C_1 at t=%g' % t_end, 'closed_form.expansion',
                     t_end * t_end / math.log(t_end) * rem_end, expected, 0.1 * abs(expected))
        report.check('oracle reliable up to t=%g' % RATE_T_MAX, 'analysis.reliable_window',
                     t_end, RATE_T_MAX, 0.0, passed=t_end >= RATE_T_MAX * (1.0 - 1e-12))
    else:
        decade = fine_rem.window(*window)
        scaled = np.array([p.t ** (nu + 1.0) * p.value for p in decade.points])
        report.check('t^(nu+1) remainder negative over a decade at nu=%g' % nu, 'closed_form.expansion',
                     float(scaled.max()), 0.0, 0.0, passed=bool(np.all(scaled < 0.0)))
        spread = float(np.abs(scaled).max() / np.abs(scaled).min()) if np.all(scaled != 0.0) else math.inf
        report.check('t^(nu+1) remainder bounded over a decade at nu=%g' % nu, 'closed_form.expansion',
                     spread, 1.0, 10.0, passed=spread <= 10.0)
        report.extend(jbound_check(nu, a, b, decade.times(), fine))

    slope = iasympt_slope(nu, a, b, np.geomspace(1e2, 1e4, 11)).slope
    order = closed_form.iasympt_order(nu)
    report.check('I(t) expansion error decays at least like t^-%g at nu=%g' % (order, nu),
                 'closed_form.iasympt_check', slope, -order, 0.2, passed=slope <= -order + 0.2)

def asymptotics(config, cache=None):
    report = Report('asymptotics')
    nu = config['nu']
    if nu is not None:
        a = config['a'] if config['a'] is not None else RATE_A
        b = config['b'] if config['b'] > 0.0 else RATE_B
        _limits(report, nu, a, b, config, cache)
        if nu != 0.5:
            _rates(report, nu, config, cache)
        return report

    for nu, a, b in LIMIT_POINTS:
        _limits(report, nu, a, b, config, cache)
    for nu in RATE_NUS:
        _rates(report, nu, config, cache)
    return report

#
# simulation
#

def _sigma(estimate):
    return math.sqrt(estimate.variance / estimate.n)

def _identity(r):
    return r

def simulation(config, cache=None):
    report = Report('simulation')
    n, threads = config['n'], config['threads']
    cfg = config.euler()
    allowance = 5.0 * cfg.dt
    stream = 0

    # hitting relation at one closed-form and one oracle point
    for nu, a, b, t in ((0.5, 2.0, 1.0, 2.0), (1.5, 2.0, 1.0, 3.0)):
        if nu == 0.5:
            tail, oracle_error = closed_form.halfindex_minus_tail(a, b, t), 0.0
        else:
            fine = _solve(nu, a, b, t, config['n_x'], config['n_t'], cache)
            coarse = _solve(nu, a, b, t, config['n_x'] // 2, config['n_t'] // 2, cache)
            tail = tail_at(fine, a, t)
            oracle_error = abs(tail - tail_at(coarse, a, t))
        result = identity_residual(nu, a, b, t, n, cfg, simulate.RngStream(config['seed'], stream), tail, threads)
        stream += 1
        tolerance = 4.0 * result.ci95 / 1.96 + oracle_error + allowance
        report.check('hitting relation residual at nu=%g, a=%g, b=%g, t=%g' % (nu, a, b, t),
                     'analysis.identity_residual', result.residual, 0.0, tolerance)

    nu, a, b, t = 0.8, 2.0, 1.0, 2.0
    total = simulate.convolution_estimate(nu, a, b, t, n, cfg, simulate.RngStream(config['seed'], stream),
                                          threads).total
    stream += 1
    expected = closed_form.tau0_tail(nu, a, t)
    report.check('P(S + U > t) = P_a(tau_0 > t) at nu=%g' % nu, 'simulate.convolution_estimate',
                 total.mean, expected, 4.0 * _sigma(total) + allowance,
                 passed=total.within(expected, 4.0, allowance))

    nu, a, t = 1.0, 1.0, 50.0
    rho = simulate.estimate_rho_tail(nu, a, t, 10 * n, cfg, simulate.RngStream(config['seed'], stream), threads)
    stream += 1
    limit = closed_form.rho_limits(nu, a, 0.0)[1]
    report.check('t^nu P(rho_inf > t) -> a^(2nu)/(2^(nu+1) Gamma(nu+1)) at t=%g' % t,
                 'simulate.estimate_rho_tail', t ** nu * rho.mean, limit,
                 t ** nu * 4.0 * _sigma(rho) + 0.03 * limit,
                 passed=rho.within(limit * t ** -nu, 4.0, 0.03 * limit * t ** -nu))

    keyprop = simulate.keyprop_estimate(nu, a, t, _identity, n, cfg, simulate.RngStream(config['seed'], stream),
                                        threads)
    stream += 1
    limit = closed_form.functional_limit(nu, a, _identity)
    report.check('t^nu E[I_t R_t^(-2nu)] -> its z-mixture limit at t=%g' % t, 'simulate.keyprop_estimate',
                 keyprop.mean, limit, 4.0 * _sigma(keyprop) + 0.03 * limit,
                 passed=keyprop.within(limit, 4.0, 0.03 * limit))

    nu, a, t, s = 0.5, 1.0, 1.0, 1e4
    conditioned = simulate.conditioned_expectation(nu, a, t, s, _identity, n, cfg,
                                                   simulate.RngStream(config['seed'], stream))
    transient = simulate.plain_expectation(nu, a, t, _identity, n, simulate.RngStream(config['seed'], stream + 1),
                                           threads)
    stream += 2
    spread = math.sqrt(conditioned.variance / conditioned.n + transient.variance / transient.n)
    report.check('E_a[R_t | tau_0 > s] under -nu matches E_a[R_t] under +nu', 'simulate.conditioned_expectation',
                 conditioned.mean, transient.mean, 4.0 * spread + 0.01 * transient.mean)

    nu, a = 0.7, 1.5
    draws = simulate.tau0_samples(nu, a, n, simulate.RngStream(config['seed'], stream).gen)
    stream += 1

    def cdf(values):
        return np.array([reg_gamma_q(nu, a * a / (2.0 * v)) for v in np.atleast_1d(values)])

    p_value = stats.kstest(draws, cdf).pvalue
    report.check('tau_0 draws follow a^2/(2 gamma_nu) (KS p-value)', 'simulate.tau0_samples',
                 p_value, 0.01, 0.0, passed=p_value >= 0.01)

    stream = _euler_benchmark(report, config, cfg, stream)
    return report

def _euler_benchmark(report, config, cfg, stream):
    """nu = 1/2 plus-sign tail against the erf law, and the bias ratio under dt halving."""
    n, threads = config['n'], config['threads']
    nu, a, b, t = 0.5, 2.0, 1.0, 2.0
    exact = closed_form.halfindex_exact(a, b, t)
    estimate = simulate.estimate_tail(nu, PLUS, a, b, t, n, cfg, simulate.RngStream(config['seed'], stream), threads)
    stream += 1
    report.check('Euler tail matches the +1/2 erf law at dt=%g' % cfg.dt, 'simulate.estimate_tail',
                 estimate.mean, exact, 4.0 * _sigma(estimate) + 5.0 * cfg.dt,
                 passed=estimate.within(exact, 4.0, 5.0 * cfg.dt))

    # coarse steps so the bias stands above the noise
    biases = []
    for dt in (0.04, 0.02):
        coarse = dataclasses.replace(cfg, dt=dt)
        est = simulate.estimate_tail(nu, PLUS, a, b, t, 4 * n, coarse, simulate.RngStream(config['seed'], stream),
                                     threads)
        stream += 1
        biases.append(est.mean - exact)
    ratio = biases[0] / biases[1] if biases[1] != 0.0 else math.inf
    logging.info('EulerBenchmark: biases %r, ratio %g', biases, ratio)
    report.check('bias ratio under dt halving', 'simulate.hitting_samples', ratio, 2.0, 0.5)
    return stream

#
# oracle
#

def oracle(config, cache=None):
    report = Report('oracle')
    nu, a, b, t = 0.5, 2.0, 1.0, 1.0
    exact = closed_form.halfindex_minus_tail(a, b, t)

    # a = 2 is a node of every grid: x = 1 + 12 k / n
    errors = []
    for n in (96, 192, 384):
        grid = SurvivalGrid(b=b, x_max=13.0, n_x=n, t_max=t, n_t=n, spacing='uniform', time_spacing='uniform')
        sol = solve_survival(nu, b, grid, cache=cache)
        errors.append(abs(tail_at(sol, a, t) - exact))
    for coarse, fine in zip(errors[:-1], errors[1:]):
        factor = coarse / fine if fine > 0.0 else math.inf
        report.check('error reduction per grid doubling', 'pde_oracle.solve_survival', factor, 4.0, 1.0)

    times = np.geomspace(0.1, 100.0, 13)
    sol = _solve(nu, a, b, times[-1], config['n_x'], config['n_t'], cache)
    worst = max(abs(tail_at(sol, a, s) - closed_form.halfindex_minus_tail(a, b, s)) for s in times)
    report.check('oracle matches the -1/2 erf law on [0.1, 100]', 'pde_oracle.tail_at', worst, 0.0, 1e-3)

    for nu in (0.3, 0.7, 1.5):
        grid = SurvivalGrid.for_query(0.0, 1.0, 1.0, n_x=config['n_x'], n_t=config['n_t'])
        sol = solve_survival(nu, 0.0, grid, validation=True, cache=cache)
        worst = max(abs(tail_at(sol, 1.0, s) - closed_form.tau0_tail(nu, 1.0, s)) for s in (0.1, 0.5, 1.0))
        report.check('validation mode (b -> 0) matches P(tau_0 > t) at nu=%g' % nu, 'pde_oracle.solve_survival',
                     worst, 0.0, 2e-3)
    return report

SUITES = {
    'identities': identities,
    'asymptotics': asymptotics,
    'simulation': simulation,
    'oracle': oracle,
}

def run_suite(name, config, cache=None):
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError('unknown suite %r, expected one of %s' % (name, ', '.join(sorted(SUITES))))
    logging.info('Suite[%s]: starting', name)
    report = suite(config, cache)
    logging.info('Suite[%s]: %d checks, %s', name, len(report.checks), 'PASS' if report.passed else 'FAIL')
    return report
