
import json
import logging
import math
import unittest

import mock
import numpy as np

from BesselHitting import analysis, closed_form
from BesselHitting.analysis import (CLOSED_FORM, MC, ORACLE, FitWindowError, Report, TailCurve,
                                    cancellation_scan, exact_curve, fit_rate, iasympt_slope, j_curve,
                                    j_prediction, j_scale, jbound_check, k1_asymptotic, k1_integral,
                                    reliable_window, remainder, rho_tail_quadrature)
from BesselHitting.closed_form import MINUS, PLUS, LawQuery
from BesselHitting.numerics import DomainError
from BesselHitting.simulate import EulerConfig, RngStream


def power_curve(coeff, slope, times, source=ORACLE):
    return TailCurve.from_arrays(times, [coeff * t ** slope for t in times], source, signed=True)

class TailCurveTest(unittest.TestCase):
    def test_validation(self):
        self.assertRaises(DomainError, TailCurve.from_arrays, [1.0, 1.0], [0.5, 0.4], ORACLE)
        self.assertRaises(DomainError, TailCurve.from_arrays, [2.0, 1.0], [0.5, 0.4], ORACLE)
        self.assertRaises(DomainError, TailCurve.from_arrays, [1.0, 2.0], [0.5, 1.5], ORACLE)
        signed = TailCurve.from_arrays([1.0, 2.0], [-0.5, 1.5], ORACLE, signed=True)
        self.assertEqual(list(signed.values()), [-0.5, 1.5])

    def test_value_at(self):
        curve = TailCurve.from_arrays([1.0, 100.0], [0.2, 0.6], ORACLE)
        self.assertEqual(curve.value_at(1.0), 0.2)
        self.assertEqual(curve.value_at(100.0), 0.6)
        # linear in log t
        self.assertAlmostEqual(curve.value_at(10.0), 0.4, delta=1e-12)
        self.assertRaises(DomainError, curve.value_at, 0.5)
        self.assertRaises(DomainError, curve.value_at, 101.0)

    def test_window_and_scaled(self):
        curve = TailCurve.from_arrays([1.0, 2.0, 3.0, 4.0], [0.4, 0.3, 0.2, 0.1], MC, ci95=[0.01] * 4)
        window = curve.window(2.0, 3.0)
        self.assertEqual(list(window.times()), [2.0, 3.0])
        scaled = window.scaled([10.0, -10.0])
        self.assertTrue(scaled.signed)
        self.assertEqual(list(scaled.values()), [3.0, -2.0])
        self.assertEqual([p.ci95 for p in scaled.points], [0.1, 0.1])
        self.assertEqual(curve.sources, {MC})

class ReportTest(unittest.TestCase):
    def test_checks(self):
        report = Report('demo')
        self.assertTrue(report.check('close', 'here', 1.0, 1.05, 0.1))
        self.assertTrue(report.passed)
        self.assertFalse(report.check('far', 'there', 1.0, 2.0, 0.1))
        self.assertFalse(report.passed)

    def test_non_finite_measurement_fails(self):
        report = Report('demo')
        self.assertFalse(report.check('nan', 'here', float('nan'), 0.0, 1.0, passed=True))

    def test_explicit_pass(self):
        report = Report('demo')
        self.assertTrue(report.check('bound', 'here', 5.0, 0.0, 0.0, passed=True))

    def test_json(self):
        report = Report('demo', columns=['t', 'tail'])
        report.check('close', 'here', 1.0, 1.0, 0.0)
        report.row(1.0, 0.5)
        report.value('kappa', 2.0)
        data = json.loads(report.to_json())
        self.assertEqual(data['title'], 'demo')
        self.assertTrue(data['pass'])
        self.assertEqual(data['checks'][0]['claim'], 'close')
        self.assertEqual(data['values'], {'kappa': 2.0})
        self.assertEqual(data['columns'], ['t', 'tail'])
        self.assertEqual(data['rows'], [[1.0, 0.5]])

    def test_check_schema(self):
        report = Report('demo')
        report.check('close', 'closed_form.kappa', 1.0, 1.0, 0.0)
        row = json.loads(report.to_json())['checks'][0]
        self.assertEqual(sorted(row), sorted(['claim', 'paper_location', 'measured', 'expected', 'tolerance', 'pass']))
        self.assertEqual(row['paper_location'], 'closed_form.kappa')
        self.assertIs(row['pass'], True)

    def test_json_without_table(self):
        data = json.loads(Report('empty').to_json())
        self.assertNotIn('columns', data)
        self.assertNotIn('values', data)
        self.assertTrue(data['pass'])

    def test_text(self):
        report = Report('demo', columns=['t', 'tail'])
        report.value('regime', 'nu_lt_1')
        report.check('far', 'there', 1.0, 2.0, 0.1)
        report.row(1.0, None)
        text = report.to_text()
        self.assertTrue(text.startswith('demo: FAIL\n'))
        self.assertIn('regime', text)
        self.assertIn('nu_lt_1', text)
        self.assertIn('NO', text)

    def test_extend(self):
        first = Report('first')
        first.check('a', 'here', 0.0, 0.0, 0.0)
        second = Report('second')
        second.check('b', 'there', 0.0, 1.0, 0.0)
        first.extend(second)
        self.assertEqual([c.claim for c in first.checks], ['a', 'b'])
        self.assertFalse(first.passed)

class CurveTest(unittest.TestCase):
    times = [0.5, 1.0, 2.0, 4.0]

    def test_exact_curve_zero_level(self):
        curve = exact_curve(0.7, MINUS, 1.5, 0.0, self.times)
        self.assertEqual(curve.sources, {CLOSED_FORM})
        for p in curve.points:
            self.assertEqual(p.value, closed_form.tau0_tail(0.7, 1.5, p.t))
        plus = exact_curve(0.7, PLUS, 1.5, 0.0, self.times)
        self.assertTrue(np.all(plus.values() == 0.0))

    def test_exact_curve_half_index(self):
        minus = exact_curve(0.5, MINUS, 2.0, 1.0, self.times)
        plus = exact_curve(0.5, PLUS, 2.0, 1.0, self.times)
        for m, p in zip(minus.points, plus.points):
            self.assertEqual(m.value, closed_form.halfindex_minus_tail(2.0, 1.0, m.t))
            self.assertEqual(p.value, closed_form.halfindex_exact(2.0, 1.0, p.t))

    def test_exact_curve_refuses(self):
        self.assertRaises(DomainError, exact_curve, 0.7, MINUS, 2.0, 1.0, self.times)

    def test_remainder(self):
        curve = exact_curve(0.5, MINUS, 2.0, 1.0, self.times)
        rem = remainder(curve, 0.5, 2.0, 1.0, MINUS)
        self.assertTrue(rem.signed)
        for p, r in zip(curve.points, rem.points):
            lead = closed_form.leading_tail(LawQuery.of(0.5, MINUS, 2.0, 1.0, p.t))
            self.assertEqual(r.value, p.value - lead)

class FitRateTest(unittest.TestCase):
    times = np.geomspace(1e2, 1e4, 9)

    def test_power_law(self):
        fit = fit_rate(power_curve(3.0, -1.5, self.times))
        self.assertAlmostEqual(fit.slope, -1.5, delta=1e-10)
        self.assertAlmostEqual(fit.intercept, math.log(3.0), delta=1e-8)
        self.assertLess(fit.residual_rms, 1e-10)
        self.assertEqual(fit.window, (1e2, 1e4))

    def test_negative_values(self):
        fit = fit_rate(power_curve(-2.0, -0.8, self.times))
        self.assertAlmostEqual(fit.slope, -0.8, delta=1e-10)

    def test_window(self):
        fit = fit_rate(power_curve(1.0, -1.0, np.geomspace(1e2, 1e4, 21)), window=(9e2, 1e4))
        self.assertAlmostEqual(fit.window[0], 1e3, delta=1e-6)

    def test_refuses_monte_carlo(self):
        self.assertRaises(FitWindowError, fit_rate, power_curve(1.0, -1.0, self.times, MC))

    def test_too_few_points(self):
        self.assertRaises(FitWindowError, fit_rate, power_curve(1.0, -1.0, self.times[:4]))

    def test_sign_change(self):
        values = [t ** -1.0 for t in self.times]
        values[3] = -values[3]
        curve = TailCurve.from_arrays(self.times, values, ORACLE, signed=True)
        self.assertRaises(FitWindowError, fit_rate, curve)

class ReliableWindowTest(unittest.TestCase):
    times = np.geomspace(1.0, 1e4, 9)

    def test_window_ends_before_disagreement(self):
        fine = power_curve(1e-3, -1.0, self.times)
        drift = [1.01 if t <= 1e3 * (1 + 1e-9) else 1.5 for t in self.times]
        coarse = TailCurve.from_arrays(self.times, fine.values() * drift, ORACLE, signed=True)
        lo, hi = reliable_window(fine, coarse)
        self.assertAlmostEqual(hi, 1e3, delta=1e-9)
        self.assertAlmostEqual(lo, 1e2, delta=1e-10)

    def test_no_reliable_point(self):
        fine = power_curve(1e-3, -1.0, self.times)
        coarse = power_curve(2e-3, -1.0, self.times)
        self.assertRaises(FitWindowError, reliable_window, fine, coarse)

class JTest(unittest.TestCase):
    def test_scale(self):
        self.assertAlmostEqual(j_scale(0.25, 16.0), 4.0, delta=1e-12)
        self.assertAlmostEqual(j_scale(1.0, math.e), math.e ** 2, delta=1e-12)
        self.assertAlmostEqual(j_scale(2.0, 10.0), 1e3, delta=1e-9)

    def test_prediction(self):
        self.assertEqual(j_prediction(0.7, 2.0, 0.0), 0.0)
        self.assertAlmostEqual(j_prediction(1.0, 2.0, 1.0), closed_form.c_const(1.0, 2.0, 1.0), delta=1e-14)

    def test_j_curve_zero_level(self):
        tail = exact_curve(0.7, MINUS, 2.0, 0.0, [1.0, 10.0])
        curve = j_curve(0.7, 2.0, 0.0, [1.0, 10.0], tail)
        self.assertEqual(list(curve.values()), [0.0, 0.0])
        self.assertEqual(curve.flags, [])

    def test_j_curve_flags_inconsistent_oracle(self):
        times = [100.0, 1000.0]
        certain = TailCurve.from_arrays(times, [1.0, 1.0], ORACLE)
        with mock.patch('logging.warning'):
            curve = j_curve(0.5, 2.0, 1.0, times, certain)
        self.assertEqual(curve.flags, times)
        self.assertTrue(np.all(curve.values() < 0.0))

    def test_jbound_needs_transient_index(self):
        self.assertRaises(DomainError, jbound_check, 1.0, 2.0, 1.0, [1.0, 2.0, 3.0], None)
        self.assertRaises(DomainError, jbound_check, 0.5, 2.0, 1.0, [1.0, 2.0, 3.0], None)

    def test_jbound_zero_level(self):
        report = jbound_check(1.5, 2.0, 0.0, [1.0, 2.0, 3.0], None)
        self.assertTrue(report.passed)
        self.assertEqual(len(report.checks), 1)

class K1Test(unittest.TestCase):
    def test_unit_index(self):
        for t in (3.0, 10.0, 100.0, 1e4):
            expected = 2.0 * math.log(t) / (t + 1.0) ** 2 - (t - 1.0) / (t * t * (t + 1.0))
            self.assertLessEqual(abs(k1_integral(1.0, t) - expected), 1e-8 * abs(expected), 't=%r' % t)

    def test_asymptotic_unit_index(self):
        for t in (3.0, 100.0, 1e4):
            expected = (2.0 * math.log(t) + 1.0 - 1.0 / t) / (t + 1.0) ** 2
            self.assertLessEqual(abs(k1_asymptotic(1.0, t) - expected), 1e-8 * expected, 't=%r' % t)

    def test_domain(self):
        self.assertRaises(DomainError, k1_integral, 0.5, 1.0)
        self.assertRaises(DomainError, k1_integral, 0.5, 10.0, lam=0.0)

class ChecksTest(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_cancellation_scan(self):
        report = cancellation_scan([0.3, 0.5, 0.7])
        self.assertTrue(report.passed)
        self.assertEqual([row[3] for row in report.rows], ['+', '0', '-'])
        self.assertAlmostEqual(report.rows[1][1], 2.0, delta=1e-9)
        self.assertRaises(DomainError, cancellation_scan, [1.0])

    def test_rho_tail_half_index(self):
        a, t = 1.0, 0.5
        expected = math.erf(1.0) + (math.exp(-1.0) - 1.0) / math.sqrt(math.pi)
        value = rho_tail_quadrature(0.5, a, t, lambda z: closed_form.halfindex_minus_tail(a, z, t))
        self.assertAlmostEqual(value, expected, delta=1e-9)
        self.assertRaises(DomainError, rho_tail_quadrature, 0.0, a, t, None)

    def test_iasympt_slope(self):
        times = np.geomspace(1e2, 1e4, 11)
        with mock.patch.object(closed_form, 'iasympt_check', side_effect=lambda nu, a, b, t: 5.0 * t ** -3.0):
            fit = iasympt_slope(1.0, 2.0, 1.0, times)
        self.assertAlmostEqual(fit.slope, -3.0, delta=1e-9)

    def test_identity_residual_needs_level(self):
        self.assertRaises(DomainError, analysis.identity_residual, 0.5, 2.0, 0.0, 1.0, 1000, EulerConfig(),
                          RngStream(1, 0), 0.5)

if __name__ == '__main__':
    unittest.main()
