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

"""Special functions and adaptive quadrature.

Every closed-form evaluation in the package goes through this module. The
functions work on plain floats; integrands given to integrate() are called
with a numpy array of nodes (scalar-only integrands are detected and called
node by node).
"""

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

__all__ = ['QuadResult', 'DomainError', 'ConvergenceError', 'QuadratureError',
           'DivergenceError', 'log_gamma', 'gamma', 'reg_gamma_p', 'reg_gamma_q',
           'erf', 'erfc', 'integrate', 'integrate_semi_infinite']

class DomainError(ValueError):
    """An argument lies outside the domain of the function."""

class ConvergenceError(ArithmeticError):
    """A series or continued fraction did not settle."""

class QuadratureError(ArithmeticError):
    """Adaptive quadrature gave up; 'best' holds the estimate reached so far."""

    def __init__(self, message, best=None):
        ArithmeticError.__init__(self, message)
        self.best = best

class DivergenceError(QuadratureError):
    """The integrand of a semi-infinite integral does not decay."""

@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int

    def __float__(self):
        return self.value

#
# Gamma function
#

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# B_2k / (2k (2k-1)) for k = 1..7
_STIRLING_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

_EULER_GAMMA = 0.57721566490153286061

# zeta(k) for k = 2..11; higher orders are summed directly
_ZETA = (
    math.pi ** 2 / 6.0,
    1.2020569031595942854,
    math.pi ** 4 / 90.0,
    1.0369277551433699263,
    math.pi ** 6 / 945.0,
    1.0083492773819228268,
    math.pi ** 8 / 9450.0,
    1.0020083928260822144,
    math.pi ** 10 / 93555.0,
    1.0004941886041194646,
)

# half-width of the windows around the zeros of ln Gamma at 1 and 2
_NEAR_ZERO = 0.2

def _zeta(k):
    if k - 2 < len(_ZETA):
        return _ZETA[k - 2]
    return sum(n ** -float(k) for n in range(1, 8))

def _log_gamma_1p(eps):
    """ln Gamma(1 + eps) for |eps| <= _NEAR_ZERO, as a Taylor series about 1."""
    total = -_EULER_GAMMA * eps
    power = eps
    for k in range(2, 60):
        power *= -eps
        term = _zeta(k) * power / k
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total

def _lanczos_log_gamma(x):
    x -= 1.0
    series = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        series += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(series)

def _stirling_log_gamma(x):
    inv = 1.0 / x
    inv2 = inv * inv
    correction = 0.0
    power = inv
    for coef in _STIRLING_COEF:
        correction += coef * power
        power *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + correction

def log_gamma(x):
    """Returns ln Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError('log_gamma is defined for finite x > 0, got %r' % x)

    if x < 0.5:
        # reflection
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    if abs(x - 1.0) <= _NEAR_ZERO:
        return _log_gamma_1p(x - 1.0)
    if abs(x - 2.0) <= _NEAR_ZERO:
        return _log_gamma_1p(x - 2.0) + math.log1p(x - 2.0)
    if x >= 10.0:
        return _stirling_log_gamma(x)
    return _lanczos_log_gamma(x)

def gamma(x):
    """Gamma(x) for x > 0, through log_gamma."""
    return math.exp(log_gamma(x))

#
# Regularized incomplete gamma function
#

_EPS = 1e-16
_TINY = 1e-300

def _max_iterations(s):
    return 10000 + int(20.0 * math.sqrt(s))

def _log_prefactor(s, x):
    return s * math.log(x) - x - log_gamma(s)

def _gamma_series(s, x):
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(_max_iterations(s)):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(s, x))
    raise ConvergenceError('reg_gamma_p series did not converge for s=%r, x=%r' % (s, x))

def _gamma_continued_fraction(s, x):
    # modified Lentz evaluation of the continued fraction for Q(s, x)
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _max_iterations(s)):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(s, x)) * h
    raise ConvergenceError('reg_gamma_p continued fraction did not converge for s=%r, x=%r' % (s, x))

def _check_gamma_args(s, x):
    s, x = float(s), float(x)
    if not s > 0.0 or math.isinf(s):
        raise DomainError('shape must be finite and > 0, got %r' % s)
    if not x >= 0.0:
        raise DomainError('argument must be >= 0, got %r' % x)
    return s, x

def reg_gamma_p(s, x):
    """P(gamma_s <= x): the regularized lower incomplete gamma function."""
    s, x = _check_gamma_args(s, x)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(1.0, _gamma_series(s, x))
    return max(0.0, 1.0 - _gamma_continued_fraction(s, x))

def reg_gamma_q(s, x):
    """1 - reg_gamma_p(s, x), computed without cancellation where possible."""
    s, x = _check_gamma_args(s, x)
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < s + 1.0:
        return max(0.0, 1.0 - _gamma_series(s, x))
    return min(1.0, _gamma_continued_fraction(s, x))

#
# Error function
#

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_ERF_SWITCH = 3.0

def _erf_series(x):
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n (2x^2)^n x / (1*3*...*(2n+1)), all terms positive
    x2 = 2.0 * x * x
    term = x
    total = x
    n = 0
    while term > total * 1e-17:
        n += 1
        term *= x2 / (2 * n + 1)
        total += term
    return _TWO_OVER_SQRT_PI * math.exp(-x * x) * total

def _erfc_continued_fraction(x):
    f = x
    c = f
    d = 0.0
    for n in range(1, 5000):
        an = 0.5 * n
        d = x + an * d
        if abs(d) < _TINY:
            d = _TINY
        c = x + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x * x) / (math.sqrt(math.pi) * f)
    raise ConvergenceError('erfc continued fraction did not converge for x=%r' % x)

def erf(x):
    """The error function."""
    x = float(x)
    if math.isnan(x):
        raise DomainError('erf of nan')
    if x < 0.0:
        return -erf(-x)
    if x < _ERF_SWITCH:
        return min(1.0, _erf_series(x))
    return 1.0 - _erfc_continued_fraction(x)

def erfc(x):
    """The complementary error function 1 - erf(x)."""
    x = float(x)
    if math.isnan(x):
        raise DomainError('erfc of nan')
    if x < 0.0:
        return 1.0 + erf(-x)
    if x < _ERF_SWITCH:
        return 1.0 - _erf_series(x)
    return _erfc_continued_fraction(x)

#
# Quadrature
#

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_PANEL_POINTS = len(_GL_NODES)

DEFAULT_TOL = 1e-10
MAX_EVALUATIONS = 1000000

def _evaluate(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
    except (TypeError, ValueError):
        # integrand written for scalars only
        y = np.array([f(float(v)) for v in x], dtype=float)
    if y.shape == ():
        y = np.full(x.shape, float(y))
    elif y.shape != x.shape:
        y = np.array([f(float(v)) for v in x], dtype=float)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise QuadratureError('integrand is not finite at x=%r' % float(bad))
    return y

def _panel(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return half * float(np.dot(_GL_WEIGHTS, _evaluate(f, mid + half * _GL_NODES)))

class _Panels(object):
    """Max-heap of refined panels keyed by their error estimate."""

    def __init__(self, f):
        self.f = f
        self.heap = []
        self.evaluations = 0
        self.value = 0.0
        self.error = 0.0
        self.frozen_value = 0.0
        self.frozen_error = 0.0

    def push(self, lo, hi, coarse):
        mid = 0.5 * (lo + hi)
        left = _panel(self.f, lo, mid)
        right = _panel(self.f, mid, hi)
        self.evaluations += 2 * _PANEL_POINTS
        value = left + right
        error = abs(value - coarse)
        heapq.heappush(self.heap, (-error, lo, hi, value, left, right))
        self.value += value
        self.error += error

    def split_worst(self):
        neg_error, lo, hi, value, left, right = heapq.heappop(self.heap)
        self.value -= value
        self.error += neg_error
        mid = 0.5 * (lo + hi)
        if not (lo < 0.5 * (lo + mid) < mid < 0.5 * (mid + hi) < hi):
            # too narrow to split in double precision
            self.frozen_value += value
            self.frozen_error -= neg_error
            return
        self.push(lo, mid, left)
        self.push(mid, hi, right)

    def resum(self):
        self.value = math.fsum(item[3] for item in self.heap)
        self.error = math.fsum(-item[0] for item in self.heap)

    def result(self):
        return QuadResult(self.value + self.frozen_value,
                          max(0.0, self.error + self.frozen_error),
                          self.evaluations)

def integrate(f, lo, hi, tol=DEFAULT_TOL, rel_tol=0.0, max_evaluations=MAX_EVALUATIONS):
    """Adaptive bisection on 10-point Gauss-Legendre panels.

    The panel with the largest error estimate (difference between the panel
    rule and the sum over its two halves) is split until the summed estimate
    drops below max(tol, rel_tol * |value|). Raises QuadratureError carrying
    the best QuadResult when max_evaluations would be exceeded.
    """
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError('integrate needs finite limits, use integrate_semi_infinite')
    if not lo < hi:
        raise DomainError('integrate needs lo < hi, got [%r, %r]' % (lo, hi))

    panels = _Panels(f)
    coarse = _panel(f, lo, hi)
    panels.evaluations += _PANEL_POINTS
    panels.push(lo, hi, coarse)

    iterations = 0
    while panels.error + panels.frozen_error > max(tol, rel_tol * abs(panels.value + panels.frozen_value)):
        if not panels.heap:
            break
        if panels.evaluations + 4 * _PANEL_POINTS > max_evaluations:
            best = panels.result()
            logging.warning('Quadrature[%g, %g]: giving up after %d evaluations, error %g',
                            lo, hi, best.evaluations, best.error_estimate)
            raise QuadratureError('quadrature did not converge on [%r, %r]' % (lo, hi), best)
        panels.split_worst()
        iterations += 1
        if iterations % 64 == 0:
            panels.resum()

    panels.resum()
    result = panels.result()
    if result.error_estimate > max(tol, rel_tol * abs(result.value)):
        raise QuadratureError('quadrature error %g above tolerance on [%r, %r]'
                              % (result.error_estimate, lo, hi), result)
    return result

def _check_decay(f, lo, shift):
    far = lo + shift * np.array([1e2, 1e4, 1e6, 1e8])
    weights = np.abs(_evaluate(f, far)) * (far - lo + 1.0)
    if weights[-1] > 1e-12 and weights[-1] > 0.9 * weights[0]:
        raise DivergenceError('integrand does not decay on [%r, inf): |f(v)| v = %r'
                              % (lo, weights.tolist()))

def integrate_semi_infinite(f, lo, tol=DEFAULT_TOL, rel_tol=0.0, tail='algebraic', decay=2.0,
                            max_evaluations=MAX_EVALUATIONS):
    """Integral of f over [lo, inf) after mapping onto (0, 1].

    tail='algebraic' substitutes v = lo - 1 + u**(-1/(decay - 1)), which turns
    an integrand decaying like v**-decay into a bounded one (decay=2 is the
    classical u = 1/v). tail='exponential' substitutes v = lo - ln u.
    """
    lo = float(lo)
    if not math.isfinite(lo):
        raise DomainError('lower limit must be finite, got %r' % lo)
    _check_decay(f, lo, 1.0)

    if tail == 'algebraic':
        if not decay > 1.0:
            raise DomainError('algebraic tail needs decay > 1, got %r' % decay)
        p = 1.0 / (decay - 1.0)

        def mapped(u):
            return f(lo - 1.0 + u ** -p) * p * u ** (-p - 1.0)
    elif tail == 'exponential':
        def mapped(u):
            return f(lo - np.log(u)) / u
    else:
        raise DomainError('unknown tail kind %r' % tail)

    return integrate(mapped, 0.0, 1.0, tol=tol, rel_tol=rel_tol, max_evaluations=max_evaluations)
