# -*- coding: utf-8 -*-

import csv
import io
import json
import math
import os
import unittest

import mock

from BesselHitting import closed_form
from BesselHitting.analysis import Report
from BesselHitting.apps import runner
from BesselHitting.apps.runner import (ConfigError, RunConfig, Runner, cmd_constants, cmd_tail, expected_rate,
                                       main, make_runner, parse_t_grid)
from BesselHitting.cache import CACHE_DIR_ENV

from BesselTestBase import BesselTestBase

class ParseTGridTest(unittest.TestCase):
    def test_log(self):
        times = parse_t_grid('1:100:3')
        self.assertEqual(len(times), 3)
        self.assertAlmostEqual(times[1], 10.0, delta=1e-12)
        self.assertEqual(parse_t_grid('1:100:3:log'), times)

    def test_lin(self):
        self.assertEqual(parse_t_grid('1:3:3:lin'), (1.0, 2.0, 3.0))

    def test_passthrough(self):
        self.assertIsNone(parse_t_grid(None))
        self.assertEqual(parse_t_grid([1, 2]), (1.0, 2.0))

    def test_invalid(self):
        for value in ('1:100', '1:100:x', '0:100:3', '10:1:3', '1:100:1', '1:100:3:cubic'):
            self.assertRaises(ConfigError, parse_t_grid, value)

class RunConfigTest(unittest.TestCase):
    def test_defaults(self):
        with mock.patch.dict(os.environ, clear=True):
            config = RunConfig.from_sources('constants')
        self.assertEqual(config['sign'], 'minus')
        self.assertEqual(config['b'], 0.0)
        self.assertEqual(config['n'], 100000)
        self.assertIsNone(config['cache_dir'])
        self.assertEqual(config.format, 'json')
        self.assertEqual(config.times(), ())

    def test_precedence(self):
        ini = {'nu': '0.4', 'a': '2', 'n-x': '64', 'bridge_correction': 'false', 'unknown': 'x'}
        flags = {'nu': 0.7, 't': 3.0}
        config = RunConfig.from_sources('tail', ini, flags)
        self.assertEqual(config['nu'], 0.7)
        self.assertEqual(config['a'], 2.0)
        self.assertEqual(config['n_x'], 64)
        self.assertFalse(config['bridge_correction'])
        self.assertFalse(config.euler().bridge_correction)
        self.assertEqual(config.times(), (3.0,))

    def test_t_grid_wins_over_t(self):
        config = RunConfig.from_sources('tail', flags={'t': 3.0, 't_grid': '1:3:3:lin'})
        self.assertEqual(config.times(), (1.0, 2.0, 3.0))

    def test_cache_dir_from_environment(self):
        with mock.patch.dict(os.environ, {CACHE_DIR_ENV: '/tmp/bessel-cache'}):
            self.assertEqual(RunConfig.from_sources('constants')['cache_dir'], '/tmp/bessel-cache')
            config = RunConfig.from_sources('constants', flags={'cache_dir': '/tmp/other'})
            self.assertEqual(config['cache_dir'], '/tmp/other')

    def test_invalid_value(self):
        self.assertRaises(ConfigError, RunConfig.from_sources, 'tail', {'n': 'many'})

    def test_rng(self):
        config = RunConfig.from_sources('simulate', flags={'seed': 11})
        self.assertEqual(config.rng(4).fingerprint, '11:4')

    def validated(self, command, **flags):
        return RunConfig.from_sources(command, flags=flags).validate()

    def test_validate(self):
        law = {'nu': 0.7, 'a': 2.0, 'b': 1.0}
        self.validated('constants', **law)
        self.validated('tail', t=1.0, **law)
        self.assertRaises(ConfigError, self.validated, 'constants', a=2.0)
        self.assertRaises(ConfigError, self.validated, 'constants', nu=-1.0, a=2.0)
        self.assertRaises(ConfigError, self.validated, 'constants', nu=0.7, a=1.0, b=1.0)
        self.assertRaises(ConfigError, self.validated, 'constants', nu=0.7, a=1.0, sign='both')
        self.assertRaises(ConfigError, self.validated, 'tail', **law)
        self.assertRaises(ConfigError, self.validated, 'tail', t_grid=(2.0, 1.0), **law)
        self.assertRaises(ConfigError, self.validated, 'tail', t=1.0, format='xml', **law)
        self.assertRaises(ConfigError, self.validated, 'tail', t=1.0, threads=0, **law)
        self.assertRaises(ConfigError, self.validated, 'tail', t=1.0, n_x=8, **law)
        self.assertRaises(ConfigError, self.validated, 'unknown', **law)

    def test_validate_simulate(self):
        law = {'nu': 0.7, 'a': 2.0, 't': 1.0}
        self.validated('simulate', **law)
        self.assertRaises(ConfigError, self.validated, 'simulate', functional='area', **law)
        self.assertRaises(ConfigError, self.validated, 'simulate', n=10, **law)
        self.assertRaises(ConfigError, self.validated, 'simulate', functional='convolution', **law)
        self.assertRaises(ConfigError, self.validated, 'simulate', functional='conditioned', s=0.5, **law)

    def test_validate_verify(self):
        self.validated('verify', suite='identities')
        self.assertRaises(ConfigError, self.validated, 'verify')
        self.assertRaises(ConfigError, self.validated, 'verify', suite='everything')

class CommandTest(BesselTestBase):
    def config(self, command, **flags):
        return RunConfig.from_sources(command, flags=flags).validate()

    def test_constants_half_index(self):
        report = cmd_constants(self.config('constants', nu=0.5, a=2.0, b=1.0))
        self.assertTrue(report.passed)
        self.assertEqual(report.values['regime'], closed_form.NU_LT_1)
        self.assertAlmostEqual(report.values['kappa'], 2.0, delta=1e-9)
        self.assertAlmostEqual(report.values['cancellation'], 0.0, delta=1e-9)
        self.assertEqual(report.values['dimension'], 1.0)
        self.assertEqual(report.values['dimension_plus'], 3.0)
        self.assertEqual(report.values['C'], closed_form.c_const(0.5, 2.0, 1.0))
        self.assertAlmostEqual(report.values['second_coeff'], 0.0, delta=1e-9)

    def test_constants_unit_index(self):
        report = cmd_constants(self.config('constants', nu=1.0, a=2.0, b=1.0))
        self.assertEqual(report.values['regime'], closed_form.NU_EQ_1)
        self.assertAlmostEqual(report.values['C'], 1.5, delta=1e-14)
        self.assertAlmostEqual(report.values['second_coeff'], -1.5, delta=1e-14)
        self.assertNotIn('kappa', report.values)

    def test_constants_transient_index(self):
        report = cmd_constants(self.config('constants', nu=1.5, a=2.0, b=1.0))
        self.assertAlmostEqual(report.values['expected_hitting_time'], 3.0, delta=1e-14)
        self.assertIn('second_upper', report.values)

    def test_tail_zero_level(self):
        report = cmd_tail(self.config('tail', nu=0.7, a=1.5, t_grid='1:100:3'))
        self.assertEqual(report.columns[:3], ['t', 'tail', 'source'])
        self.assertEqual(len(report.rows), 3)
        for row in report.rows:
            t, tail, source, lead, rem, scaled = row
            self.assertEqual(tail, closed_form.tau0_tail(0.7, 1.5, t))
            self.assertEqual(source, 'closed_form')
            self.assertEqual(rem, tail - lead)
            self.assertAlmostEqual(scaled, t ** 0.7 * tail, delta=1e-14)

    def test_tail_half_index_plus(self):
        report = cmd_tail(self.config('tail', nu=0.5, sign='plus', a=2.0, b=1.0, t=4.0))
        self.assertEqual(report.rows[0][1], closed_form.halfindex_exact(2.0, 1.0, 4.0))

    def test_expected_rate(self):
        self.assertAlmostEqual(expected_rate(0.7, 0.0, None), -1.7, delta=1e-15)
        self.assertAlmostEqual(expected_rate(0.7, 1.0, None), -1.4, delta=1e-15)
        self.assertEqual(expected_rate(0.5, 1.0, None), -1.5)
        self.assertIsNone(expected_rate(1.5, 1.0, None))
        self.assertAlmostEqual(expected_rate(1.0, 1.0, (100.0, 10000.0)), 1.0 / math.log(1000.0) - 2.0,
                               delta=1e-12)

    def test_rates_half_index(self):
        report = runner.cmd_rates(self.config('rates', nu=0.5, a=2.0, b=1.0, t_grid='100:10000:11'))
        self.assertEqual(report.values['expected_slope'], -1.5)
        self.assertTrue(report.passed, report.to_text())

class RunnerTest(BesselTestBase):
    def test_make_runner(self):
        with mock.patch('BesselHitting.apps.runner.setup_logging') as setup_logging:
            app = make_runner({}, **{'logging.config_file': 'logging.conf', 'nu': '0.4', 'n-x': '64',
                                     'unknown': '1'})
        setup_logging.assert_called_once_with('logging.conf')
        self.assertEqual(app.defaults, {'nu': '0.4', 'n_x': '64'})

    def test_flags_override_ini(self):
        app = Runner(nu='0.4', a='2')
        config = app.config('constants', {'nu': 0.7})
        self.assertEqual((config['nu'], config['a']), (0.7, 2.0))

    def test_run_writes_json(self):
        stream = io.StringIO()
        app = Runner(nu='0.5', a='2', b='1')
        report = app.run(app.config('constants'), stream)
        self.assertEqual(json.loads(stream.getvalue())['title'], report.title)

class MainTest(BesselTestBase):
    def test_constants(self):
        stream = io.StringIO()
        self.assertEqual(main(['constants', '--nu', '0.5', '--a', '2', '--b', '1'], stream), 0)
        data = json.loads(stream.getvalue())
        self.assertTrue(data['pass'])
        self.assertAlmostEqual(data['values']['kappa'], 2.0, delta=1e-9)

    def test_usage_errors(self):
        with mock.patch('sys.stderr', new_callable=io.StringIO) as stderr:
            self.assertEqual(main([], io.StringIO()), 2)
            self.assertEqual(main(['constants', '--a', '2'], io.StringIO()), 2)
        self.assertIn('ConfigError', stderr.getvalue())

    def test_failed_check(self):
        failing = Report('failing')
        failing.check('never', 'here', 1.0, 0.0, 0.0)
        with mock.patch.dict(runner.COMMANDS, {'constants': lambda config, cache=None: failing}):
            self.assertEqual(main(['constants', '--nu', '0.5', '--a', '2'], io.StringIO()), 1)

    def test_verify_delegates(self):
        with mock.patch('BesselHitting.apps.suites.run_suite', return_value=Report('identities')) as run_suite:
            self.assertEqual(main(['verify', 'identities', '--seed', '5'], io.StringIO()), 0)
        name, config, cache = run_suite.call_args[0]
        self.assertEqual(name, 'identities')
        self.assertEqual(config['seed'], 5)

    def test_csv_output(self):
        path = self.temp_path('tail.csv')
        stream = io.StringIO()
        argv = ['tail', '--nu', '0.7', '--a', '1.5', '--t-grid', '1:100:3', '--format', 'csv', '--output', path]
        self.assertEqual(main(argv, stream), 0)
        with open(path) as fd:
            rows = list(csv.reader(fd))
        self.assertEqual(rows[0], ['t', 'tail', 'source', 'leading', 'remainder', 't_nu_tail'])
        self.assertEqual(len(rows), 4)
        self.assertEqual(float(rows[1][1]), closed_form.tau0_tail(0.7, 1.5, 1.0))
        self.assertTrue(stream.getvalue().startswith('tail[nu=0.7, minus, a=1.5, b=0]: PASS'))

    def test_csv_check_rows(self):
        report = Report('checks')
        report.check('close', 'closed_form.kappa', 1.0, 1.0, 0.0)
        stream = io.StringIO()
        runner.write_report(report, runner.CSV, stream=stream)
        rows = list(csv.reader(io.StringIO(stream.getvalue())))
        self.assertEqual(rows[0], ['claim', 'paper_location', 'measured', 'expected', 'tolerance', 'pass'])
        self.assertEqual(rows[1][:2], ['close', 'closed_form.kappa'])
        self.assertEqual(rows[1][-1], 'true')

    def test_config_file(self):
        path = self.temp_path('run.ini')
        with open(path, 'w') as fd:
            fd.write('[app:main]\n'
                     'paste.app_factory = BesselHitting.apps.runner:make_runner\n'
                     'nu = 0.5\n'
                     'a = 2\n'
                     'b = 1\n')
        stream = io.StringIO()
        with mock.patch('BesselHitting.apps.runner.setup_logging'):
            self.assertEqual(main(['--config', path, 'constants', '--b', '0.5'], stream), 0)
        data = json.loads(stream.getvalue())
        self.assertEqual(data['title'], 'constants[nu=0.5, minus, a=2, b=0.5]')

    def test_simulate_is_thread_independent(self):
        argv = ['simulate', '--nu', '0.8', '--a', '1.5', '--t', '2', '--n', '2000', '--seed', '3']
        single, threaded = io.StringIO(), io.StringIO()
        self.assertEqual(main(argv + ['--threads', '1'], single), 0)
        self.assertEqual(main(argv + ['--threads', '3'], threaded), 0)
        self.assertEqual(single.getvalue(), threaded.getvalue())

if __name__ == '__main__':
    unittest.main()
