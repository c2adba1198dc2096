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

"""Remainders, rate fits and residual checks over tail curves.

A TailCurve is a list of (t, value) points tagged with where the values came
from. Limits are never extrapolated: every check reports the value measured
at a finite t next to the predicted limit and the tolerance applied.
"""

import json
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from BesselHitting import closed_form
from BesselHitting.closed_form import (MINUS, NU_EQ_1, NU_GT_1, NU_LT_1, PLUS, LawQuery,
                                       c_const, expected_hitting_time, i_parts, leading_tail,
                                       regime_of, tau0_tail)
from BesselHitting.numerics import DomainError, integrate, log_gamma
from BesselHitting.pde_oracle import tail_at

__all__ = ['CHECK_FIELDS', 'FitWindowError', 'CurvePoint', 'TailCurve', 'RateFit', 'Check', 'Report',
           'ResidualEstimate', 'exact_curve', 'oracle_curve', 'remainder', 'fit_rate',
           'reliable_window', 'j_curve', 'j_prediction', 'j_scale', 'k1_integral', 'k1_asymptotic',
           'identity_residual', 'jbound_check', 'cancellation_scan', 'iasympt_slope',
           'rho_tail_quadrature']

CLOSED_FORM = 'closed_form'
ORACLE = 'oracle'
MC = 'mc'

MIN_FIT_POINTS = 5

class FitWindowError(ValueError):
    """The fit window holds too few points, a sign change or unusable values."""

@dataclass(frozen=True)
class CurvePoint:
    t: float
    value: float
    source: str
    ci95: Optional[float] = None

@dataclass
class TailCurve:
    """Points strictly increasing in t. Probability curves stay in [0, 1];
    signed curves (remainders, J) may take any sign."""
    points: List[CurvePoint]
    signed: bool = False
    flags: List[float] = field(default_factory=list)

    def __post_init__(self):
        times = [p.t for p in self.points]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise DomainError('curve times must be strictly increasing')
        if not self.signed:
            for p in self.points:
                if not 0.0 <= p.value <= 1.0:
                    raise DomainError('probability %r at t=%r outside [0, 1]' % (p.value, p.t))

    @classmethod
    def from_arrays(cls, times, values, source, ci95=None, signed=False):
        ci95 = [None] * len(times) if ci95 is None else ci95
        points = [CurvePoint(float(t), float(v), source, None if c is None else float(c))
                  for t, v, c in zip(times, values, ci95)]
        return cls(points, signed=signed)

    def times(self):
        return np.array([p.t for p in self.points])

    def values(self):
        return np.array([p.value for p in self.points])

    @property
    def sources(self):
        return {p.source for p in self.points}

    def value_at(self, t):
        """Value at t, interpolated linearly in log t between points."""
        times = self.times()
        if not times[0] * (1 - 1e-12) <= t <= times[-1] * (1 + 1e-12):
            raise DomainError('t=%r outside the curve support [%r, %r]' % (t, times[0], times[-1]))
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) <= 1e-12 * t:
            return self.points[j].value
        return float(np.interp(math.log(t), np.log(times), self.values()))

    def window(self, t_lo, t_hi):
        return TailCurve([p for p in self.points if t_lo <= p.t <= t_hi], signed=self.signed)

    def scaled(self, factors):
        """Signed curve of value * factor(t)."""
        return TailCurve([CurvePoint(p.t, p.value * f, p.source, None if p.ci95 is None else p.ci95 * abs(f))
                          for p, f in zip(self.points, factors)], signed=True)

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual_rms: float
    window: tuple

#
# Reports
#

# column order of a check row in JSON and CSV reports
CHECK_FIELDS = ('claim', 'paper_location', 'measured', 'expected', 'tolerance', 'pass')

@dataclass
class Check:
    claim: str
    location: str
    measured: float
    expected: float
    tolerance: float
    passed: bool

    def row(self):
        return [self.claim, self.location, self.measured, self.expected, self.tolerance, self.passed]

    def as_dict(self):
        return dict(zip(CHECK_FIELDS, self.row()))

class Report(object):
    """Ordered list of checks plus an optional data table."""

    def __init__(self, title, columns=None):
        self.title = title
        self.checks = []
        self.columns = list(columns or [])
        self.rows = []
        self.values = {}

    def check(self, claim, location, measured, expected, tolerance, passed=None):
        """Records a check; by default it passes when |measured - expected| <= tolerance."""
        if passed is None:
            passed = abs(measured - expected) <= tolerance
        passed = bool(passed) and math.isfinite(measured)
        self.checks.append(Check(claim, location, float(measured), float(expected), float(tolerance), passed))
        logging.info('Report[%s]: %s %s (measured %.6g, expected %.6g, tolerance %.3g)', self.title,
                     'PASS' if passed else 'FAIL', claim, measured, expected, tolerance)
        return passed

    def row(self, *values):
        self.rows.append(list(values))

    def value(self, name, value):
        """Records a named quantity (a constant, a fitted slope)."""
        self.values[name] = value

    def extend(self, other):
        self.checks.extend(other.checks)
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        out = {'title': self.title, 'pass': self.passed, 'checks': [c.as_dict() for c in self.checks]}
        if self.values:
            out['values'] = self.values
        if self.columns:
            out['columns'] = self.columns
            out['rows'] = self.rows
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=True)

    def to_text(self):
        lines = ['%s: %s' % (self.title, 'PASS' if self.passed else 'FAIL')]
        if self.values:
            lines.extend(_aligned([[name, _cell(v)] for name, v in self.values.items()]))
        if self.checks:
            table = [['claim', 'location', 'measured', 'expected', 'tolerance', 'pass']]
            for c in self.checks:
                table.append([c.claim, c.location, '%.10g' % c.measured, '%.10g' % c.expected,
                              '%.3g' % c.tolerance, 'yes' if c.passed else 'NO'])
            lines.extend(_aligned(table))
        if self.columns:
            table = [self.columns] + [[_cell(v) for v in row] for row in self.rows]
            lines.append('')
            lines.extend(_aligned(table))
        return '\n'.join(lines) + '\n'

def _cell(value):
    if isinstance(value, float):
        return '%.10g' % value
    return '' if value is None else str(value)

def _aligned(table):
    widths = [max(len(str(row[i])) for row in table) for i in range(len(table[0]))]
    return ['  '.join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip() for row in table]

#
# Curves
#

def exact_curve(nu, sign, a, b, times):
    """Closed-form tail curve, available for b = 0 and for nu = 1/2."""
    if b == 0.0:
        values = [0.0 if sign == PLUS else tau0_tail(nu, a, t) for t in times]
    elif nu == 0.5:
        law = closed_form.halfindex_exact if sign == PLUS else closed_form.halfindex_minus_tail
        values = [law(a, b, t) for t in times]
    else:
        raise DomainError('no closed form for nu=%r, b=%r; use the oracle' % (nu, b))
    return TailCurve.from_arrays(times, values, CLOSED_FORM)

def oracle_curve(sol, a, times, sign=MINUS):
    """Tail curve read off a survival solution (the plus sign through the sign flip)."""
    values = [tail_at(sol, a, t) for t in times]
    if sign == PLUS:
        values = [closed_form.plus_from_minus(sol.nu, a, sol.b, v) for v in values]
    return TailCurve.from_arrays(times, values, ORACLE)

def remainder(curve, nu, a, b, sign):
    """value - leading_tail at every point of the curve."""
    points = []
    for p in curve.points:
        lead = leading_tail(LawQuery.of(nu, sign, a, b, p.t))
        points.append(CurvePoint(p.t, p.value - lead, p.source, p.ci95))
    return TailCurve(points, signed=True)

def fit_rate(curve, window=None):
    """Least-squares line through (log t, log |value|)."""
    if window is not None:
        curve = curve.window(*window)
    if MC in curve.sources:
        raise FitWindowError('Monte Carlo curves are not used for rate fits')
    if len(curve.points) < MIN_FIT_POINTS:
        raise FitWindowError('need at least %d points to fit, got %d' % (MIN_FIT_POINTS, len(curve.points)))
    values = curve.values()
    if np.any(values == 0.0) or not (np.all(values > 0.0) or np.all(values < 0.0)):
        raise FitWindowError('values change sign or vanish inside the window; choose another window')

    x = np.log(curve.times())
    y = np.log(np.abs(values))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    times = curve.times()
    return RateFit(float(slope), float(intercept), float(np.sqrt(np.mean(residual ** 2))),
                   (float(times[0]), float(times[-1])))

def reliable_window(fine, coarse, fraction=0.1, decades=1.0):
    """One-decade window ending at the last t where |fine - coarse| stays
    below `fraction` of |fine| (both remainder curves on the same times)."""
    times = fine.times()
    error = np.abs(fine.values() - coarse.values())
    good = error <= fraction * np.abs(fine.values())
    end = None
    for t, ok in zip(times, good):
        if not ok:
            break
        end = t
    if end is None:
        raise FitWindowError('oracle discretisation error exceeds %g of the remainder everywhere' % fraction)
    return (end / 10.0 ** decades, end)

def j_prediction(nu, a, b):
    """Limit of J(t) on its natural scale: t^(2nu) J for nu < 1,
    (t^2/log t) J for nu = 1, and the lower bound of t^(nu+1) J for nu > 1."""
    regime = regime_of(nu)
    if b == 0.0:
        return 0.0
    if regime == NU_EQ_1:
        return b * b * c_const(1.0, a, b)
    scale = math.exp(2.0 * nu * math.log(b) - nu * math.log(2.0) - log_gamma(nu))
    if regime == NU_LT_1:
        return scale * c_const(nu, a, b) * closed_form.kappa(nu)
    return scale * expected_hitting_time(nu, a, b)

def j_scale(nu, t):
    regime = regime_of(nu)
    if regime == NU_LT_1:
        return t ** (2.0 * nu)
    if regime == NU_EQ_1:
        return t * t / math.log(t)
    return t ** (nu + 1.0)

def j_curve(nu, a, b, tgrid, oracle_tail, tolerance=1e-9):
    """J(t) = I(t) - P_a(tau_b > t) under index -nu.

    Points where J < -tolerance are listed in the curve's flags: the oracle
    is then inconsistent with the exact I(t).
    """
    points = []
    flags = []
    for t in tgrid:
        if b == 0.0:
            value = 0.0
        else:
            value = i_parts(nu, a, b, t).direct - oracle_tail.value_at(t)
        if value < -tolerance:
            flags.append(float(t))
        points.append(CurvePoint(float(t), value, ORACLE))
    if flags:
        logging.warning('JCurve[nu=%g, a=%g, b=%g]: J < -%g at t = %s', nu, a, b, tolerance, flags)
    return TailCurve(points, signed=True, flags=flags)

#
# K1
#

def _split_points(lo, hi):
    """Breakpoints dense near both ends of [lo, hi], geometric in the distance to each end."""
    width = hi - lo
    steps = []
    d = width / 2.0
    while d > 1e-3 * max(1.0, lo) and len(steps) < 200:
        steps.append(d)
        d /= 2.0
    cuts = {lo, hi}
    for d in steps:
        cuts.add(lo + d)
        cuts.add(hi - d)
    return sorted(cuts)

def _piecewise(f, lo, hi, rel_tol):
    cuts = _split_points(lo, hi)
    return math.fsum(integrate(f, c0, c1, tol=1e-300, rel_tol=rel_tol).value
                     for c0, c1 in zip(cuts[:-1], cuts[1:]))

def k1_integral(nu, t, lam=1.0, rel_tol=1e-10):
    """K1(t; lam) = int_lam^t u^(-nu-1) ((t + lam - u)^(-nu) - t^(-nu)) du."""
    nu, t, lam = float(nu), float(t), float(lam)
    if not t > lam > 0.0:
        raise DomainError('need t > lambda > 0, got t=%r, lambda=%r' % (t, lam))
    t_nu = t ** -nu

    def integrand(u):
        return u ** (-nu - 1.0) * t_nu * np.expm1(-nu * np.log1p((lam - u) / t))

    return _piecewise(integrand, lam, t, rel_tol)

def k1_asymptotic(nu, t, lam=1.0, rel_tol=1e-10):
    """(t + lam)^(-2nu) int_1^(t/lam) ((v+1)^(2nu) - v^(2nu)) v^(-nu-1) dv."""
    nu, t, lam = float(nu), float(t), float(lam)
    if not t > lam > 0.0:
        raise DomainError('need t > lambda > 0, got t=%r, lambda=%r' % (t, lam))

    def integrand(v):
        return v ** (nu - 1.0) * np.expm1(2.0 * nu * np.log1p(1.0 / v))

    return (t + lam) ** (-2.0 * nu) * _piecewise(integrand, 1.0, t / lam, rel_tol)

#
# Checks
#

ResidualEstimate = namedtuple('ResidualEstimate', ['residual', 'ci95', 'window'])

def identity_residual(nu, a, b, t, n_mc, cfg, rng, oracle_tail, parallelism=1):
    """P_a(tau_b > t) minus the right-hand side of the hitting relation

        P_a(tau_b > t) P_b(tau_0 <= t) = P_a(tau_0 > t) - P_b(tau_0 > t) - D_t

    where D_t = P(S + U > t, S <= t, U <= t) is estimated by Monte Carlo.
    oracle_tail is a TailCurve, a number or a callable of t.
    """
    from BesselHitting.simulate import convolution_estimate

    if not b > 0.0:
        raise DomainError('identity_residual needs b > 0')
    if isinstance(oracle_tail, TailCurve):
        lhs = oracle_tail.value_at(t)
    elif callable(oracle_tail):
        lhs = oracle_tail(t)
    else:
        lhs = float(oracle_tail)

    window = convolution_estimate(nu, a, b, t, n_mc, cfg, rng, parallelism).window
    survive_b = 1.0 - tau0_tail(nu, b, t)
    rhs = (tau0_tail(nu, a, t) - tau0_tail(nu, b, t) - window.mean) / survive_b
    return ResidualEstimate(lhs - rhs, window.ci95 / survive_b, window)

def jbound_check(nu, a, b, tgrid, oracle_tail, tolerance=0.0, last=3):
    """Checks on the last `last` grid times, for nu > 1:
    t^(nu+1) J(t) is at least the lower bound, and t^(nu+1) (P - C/t^nu) is
    below the upper bound and bounded."""
    if not nu > 1.0 or regime_of(nu) != NU_GT_1:
        raise DomainError('jbound_check needs nu > 1, got %r' % nu)
    report = Report('jbound[nu=%g, a=%g, b=%g]' % (nu, a, b))
    tgrid = list(tgrid)[-last:]
    if b == 0.0:
        report.check('J vanishes for b = 0', 'analysis.jbound_check', 0.0, 0.0, 0.0)
        return report

    bound = j_prediction(nu, a, b)
    upper = closed_form.expansion(LawQuery.of(nu, MINUS, a, b, tgrid[-1])).second_coeff.hi
    jc = j_curve(nu, a, b, tgrid, oracle_tail)
    for p in jc.points:
        scale = p.t ** (nu + 1.0)
        rem = oracle_tail.value_at(p.t) - leading_tail(LawQuery.of(nu, MINUS, a, b, p.t))
        report.check('t^(nu+1) J(t) above its lower bound at t=%g' % p.t, 'analysis.j_curve',
                     scale * p.value, bound, tolerance, passed=scale * p.value >= bound - tolerance)
        scaled = scale * rem
        report.check('t^(nu+1) remainder below the upper bound at t=%g' % p.t, 'closed_form.expansion',
                     scaled, upper, tolerance,
                     passed=scaled <= upper + tolerance and scaled >= 10.0 * upper - tolerance)
    return report

def cancellation_scan(nu_grid, zero_tolerance=1e-9):
    """kappa_nu and 1 - nu kappa_nu over nu_grid, with the sign of the latter
    checked against nu = 1/2."""
    report = Report('cancellation', columns=['nu', 'kappa', 'one_minus_nu_kappa', 'sign'])
    for nu in nu_grid:
        if not 0.0 < nu < 1.0:
            raise DomainError('cancellation_scan needs 0 < nu < 1, got %r' % nu)
        k = closed_form.kappa(nu)
        cancel = 1.0 - nu * k
        sign = '0' if abs(cancel) <= zero_tolerance else ('+' if cancel > 0.0 else '-')
        report.row(nu, k, cancel, sign)
        if nu == 0.5:
            report.check('1 - nu kappa vanishes at nu = 1/2', 'closed_form.kappa', cancel, 0.0, zero_tolerance)
        elif nu < 0.5:
            report.check('1 - nu kappa > 0 at nu=%g' % nu, 'closed_form.kappa', cancel, 0.0, 0.0,
                         passed=cancel > zero_tolerance)
        else:
            report.check('1 - nu kappa < 0 at nu=%g' % nu, 'closed_form.kappa', cancel, 0.0, 0.0,
                         passed=cancel < -zero_tolerance)
    return report

def iasympt_slope(nu, a, b, times):
    """RateFit of |iasympt_check| over times; the decay should be at least iasympt_order(nu)."""
    values = [closed_form.iasympt_check(nu, a, b, t) for t in times]
    return fit_rate(TailCurve.from_arrays(times, values, CLOSED_FORM, signed=True))

def rho_tail_quadrature(nu, a, t, minus_tail):
    """P(rho_inf > t) under index +nu as the mixture over the level of the
    global infimum: int_0^1 P_a(tau_{a s^(1/2nu)} > t) ds under index -nu.

    minus_tail(z) returns P_a(tau_z > t) under index -nu.
    """
    if not nu > 0.0 or not a > 0.0 or not t > 0.0:
        raise DomainError('need nu, a, t > 0')

    def integrand(s):
        z = a * s ** (1.0 / (2.0 * nu))
        return minus_tail(z)

    return integrate(integrand, 0.0, 1.0, tol=1e-10).value
