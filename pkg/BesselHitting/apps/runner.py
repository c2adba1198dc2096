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

"""Command-line front end: constants, tail tables, Monte Carlo estimates,
verification suites and rate fits.

Parameters come from three places, later ones winning: built-in DEFAULTS,
the [app:main] section of a PasteDeploy ini file (--config) and the flags.
"""

import argparse
import csv
import io
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from paste.deploy import loadapp
from paste.deploy.converters import asbool, asint

from BesselHitting import closed_form, threading
from BesselHitting.analysis import (CHECK_FIELDS, CLOSED_FORM, Report, exact_curve, fit_rate,
                                    oracle_curve, reliable_window, remainder)
from BesselHitting.cache import CACHE_DIR_ENV, open_cache
from BesselHitting.closed_form import (MINUS, NU_EQ_1, NU_LT_1, PLUS, Interval, LawQuery,
                                       SignedIndex, regime_of)
from BesselHitting.pde_oracle import SurvivalGrid, solve_survival
from BesselHitting.simulate import EulerConfig, RngStream
from BesselHitting.utils import format_float, setup_logging

__all__ = ['ConfigError', 'RunConfig', 'Runner', 'make_runner', 'main', 'parse_t_grid',
           'cmd_constants', 'cmd_tail', 'cmd_simulate', 'cmd_verify', 'cmd_rates', 'write_report']

JSON = 'json'
CSV = 'csv'
FORMATS = (JSON, CSV)

FUNCTIONALS = ('tail', 'rho', 'conditioned', 'convolution')

DEFAULTS = {
    'nu': None,
    'sign': MINUS,
    'a': None,
    'b': 0.0,
    't': None,
    't_grid': None,
    's': None,
    'n': 100000,
    'dt': 1e-3,
    'seed': 0,
    'threads': 1,
    'cache_dir': None,
    'output': None,
    'format': JSON,
    'bridge_correction': True,
    'max_steps': 10000000,
    'n_x': 1024,
    'n_t': 1024,
    'functional': 'tail',
    'suite': None,
    'slope_tolerance': 0.15,
}

# |1 - nu kappa| below this means the t^(-2nu) term of the remainder vanishes
CANCELLATION_TOLERANCE = 1e-8

# Euler bias allowed on top of 4 sigma, per unit of the clock step
EULER_ALLOWANCE = 5.0

class ConfigError(ValueError):
    """Missing or invalid run parameters."""

def parse_t_grid(value):
    """'lo:hi:points[:log|lin]' -> tuple of times; log spacing is the default."""
    if value is None or isinstance(value, (tuple, list)):
        return None if value is None else tuple(float(t) for t in value)
    parts = str(value).split(':')
    if len(parts) not in (3, 4):
        raise ConfigError('t-grid must look like lo:hi:points[:log|lin], got %r' % value)
    try:
        lo, hi, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError('t-grid must look like lo:hi:points[:log|lin], got %r' % value)
    spacing = parts[3] if len(parts) == 4 else 'log'
    if not 0.0 < lo < hi or points < 2:
        raise ConfigError('t-grid needs 0 < lo < hi and at least 2 points, got %r' % value)
    if spacing == 'log':
        return tuple(float(t) for t in np.geomspace(lo, hi, points))
    if spacing == 'lin':
        return tuple(float(t) for t in np.linspace(lo, hi, points))
    raise ConfigError('t-grid spacing must be log or lin, got %r' % spacing)

def _optional(convert):
    def wrapped(value):
        if value is None or value == '':
            return None
        return convert(value)
    return wrapped

CONVERTERS = {
    'nu': _optional(float),
    'a': _optional(float),
    'b': float,
    't': _optional(float),
    't_grid': parse_t_grid,
    's': _optional(float),
    'n': asint,
    'dt': float,
    'seed': asint,
    'threads': asint,
    'cache_dir': _optional(str),
    'output': _optional(str),
    'format': str,
    'bridge_correction': asbool,
    'max_steps': asint,
    'n_x': asint,
    'n_t': asint,
    'functional': str,
    'suite': _optional(str),
    'sign': str,
    'slope_tolerance': float,
}

@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output: Optional[str] = None
    format: str = JSON

    @classmethod
    def from_sources(cls, command, ini=None, flags=None):
        """DEFAULTS, overridden by ini values, overridden by flags (None means unset)."""
        merged = dict(DEFAULTS)
        if merged['cache_dir'] is None:
            merged['cache_dir'] = os.environ.get(CACHE_DIR_ENV)
        for source in (ini or {}, flags or {}):
            for name, value in source.items():
                name = name.replace('-', '_')
                if name in DEFAULTS and value is not None:
                    merged[name] = value

        params = {}
        for name, value in merged.items():
            try:
                params[name] = CONVERTERS[name](value)
            except (TypeError, ValueError) as e:
                raise ConfigError('invalid value %r for %s: %s' % (value, name, e))
        return cls(command, params, params['output'], params['format'])

    def __getitem__(self, name):
        return self.params[name]

    def times(self):
        if self.params['t_grid'] is not None:
            return self.params['t_grid']
        if self.params['t'] is not None:
            return (self.params['t'],)
        return ()

    def euler(self):
        return EulerConfig(dt=self.params['dt'], bridge_correction=self.params['bridge_correction'],
                           max_steps=self.params['max_steps'])

    def rng(self, stream_id=0):
        return RngStream(self.params['seed'], stream_id)

    def _require(self, *names):
        missing = [name for name in names if self.params[name] is None]
        if missing:
            raise ConfigError('%s needs %s' % (self.command, ', '.join('--' + m.replace('_', '-') for m in missing)))

    def _check_law(self):
        self._require('nu', 'a')
        nu, a, b = self.params['nu'], self.params['a'], self.params['b']
        if not nu > 0.0 or not math.isfinite(nu):
            raise ConfigError('--nu must be finite and > 0, got %r' % nu)
        if self.params['sign'] not in (PLUS, MINUS):
            raise ConfigError('--sign must be %s or %s, got %r' % (PLUS, MINUS, self.params['sign']))
        if not a > 0.0 or not math.isfinite(a):
            raise ConfigError('--a must be finite and > 0, got %r' % a)
        if not 0.0 <= b < a:
            raise ConfigError('need 0 <= b < a, got a=%r, b=%r' % (a, b))

    def _check_times(self):
        times = self.times()
        if not times:
            raise ConfigError('%s needs --t or --t-grid' % self.command)
        if not times[0] > 0.0 or any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ConfigError('times must be > 0 and strictly increasing')

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError('unknown command %r' % self.command)
        if self.format not in FORMATS:
            raise ConfigError('--format must be one of %s, got %r' % (', '.join(FORMATS), self.format))
        if self.params['threads'] < 1:
            raise ConfigError('--threads must be >= 1, got %r' % self.params['threads'])
        if self.params['n'] < 1:
            raise ConfigError('--n must be >= 1, got %r' % self.params['n'])
        if not self.params['dt'] > 0.0:
            raise ConfigError('--dt must be > 0, got %r' % self.params['dt'])
        if self.params['n_x'] < 16 or self.params['n_t'] < 16:
            raise ConfigError('--n-x and --n-t must be >= 16')

        if self.command == 'constants':
            self._check_law()
        elif self.command in ('tail', 'rates'):
            self._check_law()
            self._check_times()
        elif self.command == 'simulate':
            self._check_law()
            self._check_times()
            functional = self.params['functional']
            if functional not in FUNCTIONALS:
                raise ConfigError('--functional must be one of %s, got %r' % (', '.join(FUNCTIONALS), functional))
            if functional == 'tail' and self.params['n'] < 100:
                raise ConfigError('tail estimates need --n >= 100')
            if functional == 'convolution' and not self.params['b'] > 0.0:
                raise ConfigError('the convolution estimate needs --b > 0')
            if self.params['s'] is not None and not self.params['s'] > self.times()[-1]:
                raise ConfigError('--s must exceed every t, got %r' % self.params['s'])
        elif self.command == 'verify':
            from BesselHitting.apps.suites import SUITES
            if self.params['suite'] not in SUITES:
                raise ConfigError('verify needs a suite: %s' % ', '.join(sorted(SUITES)))
        return self

#
# Commands
#

def _law_title(name, config):
    return '%s[nu=%g, %s, a=%g, b=%g]' % (name, config['nu'], config['sign'], config['a'], config['b'])

def cmd_constants(config, cache=None):
    """C_nu, kappa_nu and 1 - nu kappa_nu (nu < 1), dimensions, regime and
    the second-order terms of the tail expansion."""
    nu, sign, a, b = config['nu'], config['sign'], config['a'], config['b']
    index = SignedIndex(nu, sign)
    report = Report(_law_title('constants', config))

    report.value('nu', nu)
    report.value('regime', index.regime)
    report.value('dimension', index.dimension)
    report.value('dimension_plus', SignedIndex(nu, PLUS).dimension)
    report.value('dimension_minus', SignedIndex(nu, MINUS).dimension)
    report.value('C', closed_form.c_const(nu, a, b))

    if index.regime == NU_LT_1:
        semi_infinite, finite = closed_form.kappa_forms(nu)
        report.check('both integral forms of kappa agree', 'closed_form.kappa_forms', semi_infinite, finite,
                     closed_form.KAPPA_AGREEMENT * max(1.0, abs(finite)))
        kappa = closed_form.kappa(nu)
        report.value('kappa', kappa)
        report.value('cancellation', 1.0 - nu * kappa)
    elif index.regime != NU_EQ_1:
        report.value('expected_hitting_time', closed_form.expected_hitting_time(nu, a, b))

    prediction = closed_form.expansion(LawQuery.of(nu, sign, a, b, 1.0))
    report.value('leading', prediction.leading)
    report.value('second_scale', prediction.second_scale)
    if isinstance(prediction.second_coeff, Interval):
        report.value('second_lower', prediction.second_coeff.lo)
        report.value('second_upper', prediction.second_coeff.hi)
    else:
        report.value('second_coeff', prediction.second_coeff)
    return report

def _has_closed_form(nu, b):
    return b == 0.0 or nu == 0.5

def tail_curve_for(config, times, cache=None, coarse=False):
    """Closed-form curve when one exists, else an oracle curve."""
    nu, sign, a, b = config['nu'], config['sign'], config['a'], config['b']
    if _has_closed_form(nu, b):
        return exact_curve(nu, sign, a, b, times)
    n_x, n_t = config['n_x'], config['n_t']
    if coarse:
        n_x, n_t = n_x // 2, n_t // 2
    grid = SurvivalGrid.for_query(b, a, times[-1], n_x=n_x, n_t=n_t)
    sol = solve_survival(nu, b, grid, cache=cache)
    return oracle_curve(sol, a, times, sign)

def cmd_tail(config, cache=None):
    nu, sign, a, b = config['nu'], config['sign'], config['a'], config['b']
    curve = tail_curve_for(config, config.times(), cache)
    report = Report(_law_title('tail', config),
                    columns=['t', 'tail', 'source', 'leading', 'remainder', 't_nu_tail'])
    report.value('limit', closed_form.expansion(LawQuery.of(nu, sign, a, b, 1.0)).leading)
    for p in curve.points:
        lead = closed_form.leading_tail(LawQuery.of(nu, sign, a, b, p.t))
        report.row(p.t, p.value, p.source, lead, p.value - lead, p.t ** nu * p.value)
    return report

def _identity(r):
    return r

def _combined_within(first, second, sigmas=4.0, allowance=0.0):
    spread = math.sqrt(first.variance / first.n + second.variance / second.n)
    return abs(first.mean - second.mean) <= sigmas * spread + allowance

def cmd_simulate(config, cache=None):
    """Monte Carlo estimates on the time list, with a reference next to each."""
    from BesselHitting import simulate

    nu, sign, a, b = config['nu'], config['sign'], config['a'], config['b']
    n, threads = config['n'], config['threads']
    functional = config['functional']
    cfg = config.euler()
    report = Report('simulate[%s, nu=%g, %s, a=%g, b=%g]' % (functional, nu, sign, a, b),
                    columns=['functional', 't', 'n', 'mean', 'ci95', 'reference', 'reference_source', 'seeds'])

    for k, t in enumerate(config.times()):
        rng = config.rng(k)
        reference, source = None, None
        if functional == 'tail':
            estimate = simulate.estimate_tail(nu, sign, a, b, t, n, cfg, rng, threads)
            if _has_closed_form(nu, b):
                reference, source = exact_curve(nu, sign, a, b, [t]).points[0].value, CLOSED_FORM
                allowance = 0.0 if b == 0.0 else EULER_ALLOWANCE * cfg.dt
                report.check('tail estimate matches the exact law at t=%g' % t, 'simulate.estimate_tail',
                             estimate.mean, reference, 4.0 * math.sqrt(estimate.variance / n) + allowance,
                             passed=estimate.within(reference, 4.0, allowance))
            else:
                reference, source = closed_form.leading_tail(LawQuery.of(nu, sign, a, b, t)), 'leading'
        elif functional == 'rho':
            estimate = simulate.estimate_rho_tail(nu, a, t, n, cfg, rng, threads)
            reference, source = closed_form.rho_limits(nu, a, 0.0)[1] * t ** -nu, 'limit'
            allowance = 0.03 * reference
            report.check('t^nu P(rho_inf > t) near its limit at t=%g' % t, 'simulate.estimate_rho_tail',
                         estimate.mean, reference, 4.0 * math.sqrt(estimate.variance / n) + allowance,
                         passed=estimate.within(reference, 4.0, allowance))
        elif functional == 'conditioned':
            s = config['s'] if config['s'] is not None else 100.0 * t
            estimate = simulate.conditioned_expectation(nu, a, t, s, _identity, n, cfg, rng)
            transient = simulate.plain_expectation(nu, a, t, _identity, n, RngStream(config['seed'], k, 1), threads)
            reference, source = transient.mean, 'plus_index_mc'
            report.check('E[R_t | tau_0 > s] matches the +nu law at t=%g, s=%g' % (t, s),
                         'simulate.conditioned_expectation', estimate.mean, reference,
                         4.0 * math.sqrt(estimate.variance / n + transient.variance / n),
                         passed=_combined_within(estimate, transient))
        else:
            estimate = simulate.convolution_estimate(nu, a, b, t, n, cfg, rng, threads).total
            reference, source = closed_form.tau0_tail(nu, a, t), CLOSED_FORM
            allowance = EULER_ALLOWANCE * cfg.dt
            report.check('P(S + U > t) matches P_a(tau_0 > t) at t=%g' % t, 'simulate.convolution_estimate',
                         estimate.mean, reference, 4.0 * math.sqrt(estimate.variance / n) + allowance,
                         passed=estimate.within(reference, 4.0, allowance))
        report.row(functional, t, estimate.n, estimate.mean, estimate.ci95, reference, source, estimate.seeds)
    return report

def cmd_verify(config, cache=None):
    from BesselHitting.apps.suites import run_suite
    return run_suite(config['suite'], config, cache)

def expected_rate(nu, b, window):
    """Decay exponent of the tail remainder, None when only bounds are known."""
    regime = regime_of(nu)
    if b == 0.0:
        return -(nu + 1.0)
    if regime == NU_LT_1:
        if abs(1.0 - nu * closed_form.kappa(nu)) <= CANCELLATION_TOLERANCE:
            return -min(3.0 * nu, nu + 1.0)
        return -2.0 * nu
    if regime == NU_EQ_1:
        # local slope of log(t)/t^2 at the middle of the window
        return 1.0 / math.log(math.sqrt(window[0] * window[1])) - 2.0
    return None

def cmd_rates(config, cache=None):
    """Remainder of the tail after its leading term, and its fitted decay."""
    nu, sign, a, b = config['nu'], config['sign'], config['a'], config['b']
    times = config.times()
    curve = tail_curve_for(config, times, cache)
    rem = remainder(curve, nu, a, b, sign)
    window = None
    if not _has_closed_form(nu, b):
        coarse = remainder(tail_curve_for(config, times, cache, coarse=True), nu, a, b, sign)
        window = reliable_window(rem, coarse)
    fit = fit_rate(rem, window)

    report = Report(_law_title('rates', config), columns=['t', 'tail', 'remainder', 'source'])
    for p, r in zip(curve.points, rem.points):
        report.row(p.t, p.value, r.value, p.source)
    report.value('slope', fit.slope)
    report.value('intercept', fit.intercept)
    report.value('residual_rms', fit.residual_rms)
    report.value('window_lo', fit.window[0])
    report.value('window_hi', fit.window[1])
    expected = expected_rate(nu, b, fit.window)
    if expected is not None:
        report.value('expected_slope', expected)
        report.check('remainder decays like t^%.4g' % expected, 'analysis.fit_rate', fit.slope, expected,
                     config['slope_tolerance'])
    return report

COMMANDS = {
    'constants': cmd_constants,
    'tail': cmd_tail,
    'simulate': cmd_simulate,
    'verify': cmd_verify,
    'rates': cmd_rates,
}

#
# Output
#

def _csv_cell(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return '' if value is None else str(value)

def _report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    if report.columns:
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_csv_cell(v) for v in row])
    elif report.values:
        writer.writerow(['name', 'value'])
        for name, value in report.values.items():
            writer.writerow([name, _csv_cell(value)])
    else:
        writer.writerow(CHECK_FIELDS)
        for c in report.checks:
            writer.writerow([_csv_cell(v) for v in c.row()])
    return buf.getvalue()

def write_report(report, fmt=JSON, output=None, stream=None):
    """Writes the report to `output` (or `stream` when no path is given)."""
    text = report.to_json() + '\n' if fmt == JSON else _report_csv(report)
    if output is None:
        (stream or sys.stdout).write(text)
        return
    with open(output, 'w', newline='') as fd:
        fd.write(text)
    logging.info('Runner: wrote %s', output)

#
# Runner
#

class Runner(object):
    """Holds the ini-level defaults and runs commands against them."""

    def __init__(self, **defaults):
        self.defaults = defaults

    def config(self, command, flags=None):
        return RunConfig.from_sources(command, self.defaults, flags).validate()

    def run(self, config, stream=None):
        cache = open_cache(config['cache_dir'])
        try:
            logging.info('Runner[%s]: starting', config.command)
            report = COMMANDS[config.command](config, cache=cache)
        finally:
            cache.shutdown()
        write_report(report, config.format, config.output, stream)
        if config.output is not None:
            (stream or sys.stdout).write(report.to_text())
        return report

def make_runner(global_conf, **local_conf):
    # setup the logger
    setup_logging(local_conf.get('logging.config_file'))

    defaults = dict((k.replace('-', '_'), v) for k, v in local_conf.items()
                    if k.replace('-', '_') in DEFAULTS)
    return Runner(**defaults)

def build_parser():
    parser = argparse.ArgumentParser(prog='besselctl', description='First hitting times of Bessel processes')
    parser.add_argument('--config', help='PasteDeploy ini file with an [app:main] section')
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--nu', type=float, help='index magnitude nu > 0')
    common.add_argument('--sign', choices=[PLUS, MINUS], help='sign of the index (default minus)')
    common.add_argument('--a', type=float, help='starting point a > 0')
    common.add_argument('--b', type=float, help='level 0 <= b < a (default 0)')
    common.add_argument('--t', type=float, help='a single time')
    common.add_argument('--t-grid', dest='t_grid', help='lo:hi:points[:log|lin], log-spaced by default')
    common.add_argument('--n', type=int, help='Monte Carlo sample size')
    common.add_argument('--dt', type=float, help='step of the Brownian clock')
    common.add_argument('--seed', type=int, help='root seed')
    common.add_argument('--threads', type=int, help='worker threads (results do not depend on it)')
    common.add_argument('--cache-dir', dest='cache_dir', help='directory of the PDE solution cache (default $%s)'
                        % CACHE_DIR_ENV)
    common.add_argument('--output', help='output file (default stdout)')
    common.add_argument('--format', choices=FORMATS, help='output format (default json)')
    common.add_argument('--n-x', dest='n_x', type=int, help='oracle space cells')
    common.add_argument('--n-t', dest='n_t', type=int, help='oracle time steps')
    common.add_argument('--bridge-correction', dest='bridge_correction', choices=['on', 'off'],
                        help='Brownian-bridge crossing correction (default on)')
    common.add_argument('--max-steps', dest='max_steps', type=int, help='walk truncation')

    subparsers.add_parser('constants', parents=[common], help='Constants of the tail expansion')
    subparsers.add_parser('tail', parents=[common], help='Tail table on a time grid')
    simulate_parser = subparsers.add_parser('simulate', parents=[common], help='Monte Carlo estimates')
    simulate_parser.add_argument('--functional', choices=FUNCTIONALS, help='what to estimate (default tail)')
    simulate_parser.add_argument('--s', type=float, help='conditioning horizon (default 100 t)')
    verify_parser = subparsers.add_parser('verify', parents=[common], help='Run a verification suite')
    verify_parser.add_argument('suite', help='identities, asymptotics, simulation or oracle')
    rates_parser = subparsers.add_parser('rates', parents=[common], help='Remainder decay fit')
    rates_parser.add_argument('--slope-tolerance', dest='slope_tolerance', type=float,
                              help='allowed distance from the predicted slope (default 0.15)')
    return parser

def main(argv=None, stream=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return 2

    try:
        if args.config:
            runner = loadapp('config:%s' % os.path.abspath(args.config))
        else:
            setup_logging()
            runner = Runner()
        flags = dict((k, v) for k, v in vars(args).items() if k in DEFAULTS and v is not None)
        report = runner.run(runner.config(args.command, flags), stream)
    except Exception as e:
        logging.debug('Runner: failed', exc_info=True)
        sys.stderr.write('error: %s: %s\n' % (e.__class__.__name__, e))
        return 2
    finally:
        threading.shutdown()

    return 0 if report.passed else 1

if __name__ == '__main__':
    sys.exit(main())
