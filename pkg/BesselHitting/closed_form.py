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

"""Exact laws and asymptotic predictions for Bessel hitting times.

Notation used throughout: the index is +nu (sign 'plus', transient) or -nu
(sign 'minus', hits zero); R starts at a > 0 and tau_b is the first time R
reaches the level b in [0, a).
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Union

import numpy as np

from BesselHitting.numerics import (DomainError, QuadratureError, erf, integrate,
                                    integrate_semi_infinite, log_gamma, reg_gamma_p,
                                    reg_gamma_q)

__all__ = ['PLUS', 'MINUS', 'NU_LT_1', 'NU_EQ_1', 'NU_GT_1', 'TAIL_FLOOR',
           'UnderflowError', 'SignedIndex', 'LawQuery', 'Interval', 'ExpansionPrediction',
           'IParts', 'regime_of', 'tau0_tail', 'tau0_tail_flagged', 'inverse_moment',
           'infimum_tail', 'c_const', 'kappa', 'kappa_forms', 'keyprop_coefficient',
           'leading_tail', 'plus_from_minus', 'expected_hitting_time', 'expansion',
           'i_parts', 'iasympt_prediction', 'iasympt_check', 'iasympt_order',
           'halfindex_exact', 'halfindex_minus_tail', 'rho_limits', 'functional_limit',
           'convolution_identity_sides']

PLUS = 'plus'
MINUS = 'minus'

NU_LT_1 = 'nu_lt_1'
NU_EQ_1 = 'nu_eq_1'
NU_GT_1 = 'nu_gt_1'

# |nu - 1| below this is dispatched as nu = 1
NU_ONE_WINDOW = 1e-9

TAIL_FLOOR = 1e-300

KAPPA_AGREEMENT = 1e-8

class UnderflowError(ArithmeticError):
    """A probability needed as a divisor is below double precision."""

def _check_nu(nu):
    nu = float(nu)
    if not nu > 0.0 or not math.isfinite(nu):
        raise DomainError('index must be finite and > 0 (nu = 0 is not treated), got %r' % nu)
    return nu

def _check_levels(a, b):
    a, b = float(a), float(b)
    if not a > 0.0 or not math.isfinite(a):
        raise DomainError('start must be finite and > 0, got %r' % a)
    if not 0.0 <= b < a:
        raise DomainError('level must satisfy 0 <= b < a, got a=%r, b=%r' % (a, b))
    return a, b

def _check_time(t):
    t = float(t)
    if not t > 0.0:
        raise DomainError('time must be > 0, got %r' % t)
    return t

def regime_of(nu):
    """Classifies nu against 1; values within NU_ONE_WINDOW of 1 count as 1."""
    nu = _check_nu(nu)
    if abs(nu - 1.0) <= NU_ONE_WINDOW:
        if nu != 1.0:
            logging.warning('Regime[nu=%.17g]: within %g of 1, treating as nu = 1', nu, NU_ONE_WINDOW)
        return NU_EQ_1
    return NU_LT_1 if nu < 1.0 else NU_GT_1

@dataclass(frozen=True)
class SignedIndex:
    nu: float
    sign: str = MINUS

    def __post_init__(self):
        object.__setattr__(self, 'nu', _check_nu(self.nu))
        if self.sign not in (PLUS, MINUS):
            raise DomainError('sign must be %r or %r, got %r' % (PLUS, MINUS, self.sign))

    @property
    def dimension(self):
        """delta with index = delta/2 - 1."""
        if self.sign == PLUS:
            return 2.0 * (self.nu + 1.0)
        return 2.0 * (1.0 - self.nu)

    @property
    def drift(self):
        """Drift of the Brownian motion in the exponential time change."""
        return self.nu if self.sign == PLUS else -self.nu

    @property
    def regime(self):
        return regime_of(self.nu)

    def flipped(self):
        return SignedIndex(self.nu, MINUS if self.sign == PLUS else PLUS)

@dataclass(frozen=True)
class LawQuery:
    index: SignedIndex
    a: float
    b: float
    t: float

    def __post_init__(self):
        a, b = _check_levels(self.a, self.b)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 't', _check_time(self.t))

    @classmethod
    def of(cls, nu, sign, a, b, t):
        return cls(SignedIndex(nu, sign), a, b, t)

    @property
    def nu(self):
        return self.index.nu

    @property
    def sign(self):
        return self.index.sign

Interval = namedtuple('Interval', ['lo', 'hi'])

@dataclass(frozen=True)
class ExpansionPrediction:
    """First and second order terms of P(t < tau_b < inf) as t grows.

    leading multiplies t**-nu. For nu <= 1 second_coeff is a number
    multiplying second_scale; for nu > 1 it is an Interval bounding
    limsup/liminf of t**(nu+1) * (P - leading * t**-nu).
    """
    nu: float
    leading: float
    second_coeff: Union[float, Interval]
    second_scale: str
    regime: str
    sign: str = MINUS
    near_boundary: bool = False

    def first_term(self, t):
        return self.leading * t ** (-self.nu)

    def second_term(self, t):
        """Value of the second-order term at t (None when only bounds are known)."""
        if isinstance(self.second_coeff, Interval):
            return None
        if self.regime == NU_LT_1:
            return self.second_coeff * t ** (-2.0 * self.nu)
        return self.second_coeff * math.log(t) / (t * t)

#
# Laws
#

def tau0_tail_flagged(nu, x, t):
    """(P_x(tau_0 > t) under index -nu, underflowed flag).

    Values below TAIL_FLOOR are returned as 0.0 with the flag set.
    """
    nu = _check_nu(nu)
    x = float(x)
    if not x >= 0.0:
        raise DomainError('start must be >= 0, got %r' % x)
    t = _check_time(t)
    if x == 0.0:
        return 0.0, False

    value = reg_gamma_p(nu, x * x / (2.0 * t))
    if value < TAIL_FLOOR:
        return 0.0, True
    return value, False

def tau0_tail(nu, x, t):
    """P_x(tau_0 > t) under index -nu, i.e. P(gamma_nu <= x^2/(2t))."""
    return tau0_tail_flagged(nu, x, t)[0]

def inverse_moment(nu, x, t):
    """E_x[R_t^(-2 nu)] under index +nu."""
    nu = _check_nu(nu)
    x = float(x)
    if not x > 0.0:
        raise DomainError('inverse_moment needs x > 0, got %r' % x)
    return x ** (-2.0 * nu) * tau0_tail(nu, x, t)

def infimum_tail(nu, x, y):
    """P_x(I_inf > y) = 1 - (y/x)^(2 nu) under index +nu."""
    nu = _check_nu(nu)
    x, y = float(x), float(y)
    if not x > 0.0:
        raise DomainError('start must be > 0, got %r' % x)
    if not 0.0 <= y <= x:
        raise DomainError('need 0 <= y <= x, got x=%r, y=%r' % (x, y))
    if y == 0.0:
        return 1.0
    return -math.expm1(2.0 * nu * math.log(y / x))

def _power_ratio(b, a, p):
    """(b/a)**p with (0/a)**p = 0."""
    return 0.0 if b == 0.0 else math.exp(p * math.log(b / a))

def c_const(nu, a, b):
    """(a^(2nu) - b^(2nu)) / (2^nu Gamma(nu+1))."""
    nu = _check_nu(nu)
    a, b = _check_levels(a, b)
    scale = math.exp(2.0 * nu * math.log(a) - nu * math.log(2.0) - log_gamma(nu + 1.0))
    if b == 0.0:
        return scale
    return -scale * math.expm1(2.0 * nu * math.log(b / a))

def keyprop_coefficient(nu, a):
    """2 nu / (2^nu a^(2nu) Gamma(nu+1))."""
    nu = _check_nu(nu)
    a = float(a)
    if not a > 0.0:
        raise DomainError('start must be > 0, got %r' % a)
    return 2.0 * nu * math.exp(-nu * math.log(2.0) - 2.0 * nu * math.log(a) - log_gamma(nu + 1.0))

def _kappa_semi_infinite(nu):
    def integrand(v):
        # ((v+1)^(2nu) - v^(2nu)) v^(-nu-1), written without overflow or cancellation
        return v ** (nu - 1.0) * np.expm1(2.0 * nu * np.log1p(1.0 / v))
    return integrate_semi_infinite(integrand, 1.0, tol=1e-12, rel_tol=1e-13, decay=2.0 - nu).value

def _kappa_finite(nu):
    # y = 1 - x, then y = w^(1/(1-nu)) removes the (1-x)^(-nu) endpoint singularity
    p = 1.0 / (1.0 - nu)

    def integrand(w):
        y = w ** p
        numerator = -np.expm1(2.0 * nu * np.log1p(-y))
        return numerator / (y * (1.0 - y) ** (nu + 1.0)) * p

    return integrate(integrand, 0.0, 0.5 ** (1.0 - nu), tol=1e-12, rel_tol=1e-13).value

def kappa_forms(nu):
    """kappa_nu from the semi-infinite and the finite-interval integral."""
    nu = _check_nu(nu)
    if not nu < 1.0:
        raise DomainError('kappa is defined for 0 < nu < 1 (the integral diverges), got %r' % nu)
    return _kappa_semi_infinite(nu), _kappa_finite(nu)

def kappa(nu):
    """kappa_nu = int_1^inf ((v+1)^(2nu) - v^(2nu)) v^(-nu-1) dv for 0 < nu < 1."""
    semi_infinite, finite = kappa_forms(nu)
    if abs(semi_infinite - finite) > KAPPA_AGREEMENT * max(1.0, abs(finite)):
        raise QuadratureError('kappa(%r) representations disagree: %r vs %r'
                              % (nu, semi_infinite, finite))
    return finite

#
# Asymptotics
#

def leading_tail(q):
    """C_nu / t^nu for the minus sign, (b/a)^(2nu) C_nu / t^nu for the plus sign."""
    value = c_const(q.nu, q.a, q.b) * q.t ** (-q.nu)
    if q.sign == PLUS:
        value *= _power_ratio(q.b, q.a, 2.0 * q.nu)
    return value

def plus_from_minus(nu, a, b, minus_tail):
    """P^(+nu)_a(t < tau_b < inf) from P^(-nu)_a(tau_b > t)."""
    nu = _check_nu(nu)
    a, b = _check_levels(a, b)
    return _power_ratio(b, a, 2.0 * nu) * minus_tail

def expected_hitting_time(nu, a, b):
    """E_a[tau_b] under index -nu, finite for nu > 1."""
    nu = _check_nu(nu)
    a, b = _check_levels(a, b)
    if not nu > 1.0:
        raise DomainError('E[tau_b] is finite only for nu > 1, got %r' % nu)
    return (a * a - b * b) / (2.0 * (nu - 1.0))

def _second_order_scale(nu, b):
    """b^(2nu) / (2^nu Gamma(nu+1))."""
    if b == 0.0:
        return 0.0
    return math.exp(2.0 * nu * math.log(b) - nu * math.log(2.0) - log_gamma(nu + 1.0))

def expansion(q):
    """Two-term expansion of the tail described by a LawQuery."""
    nu, a, b = q.nu, q.a, q.b
    regime = regime_of(nu)
    near_boundary = regime == NU_EQ_1 and nu != 1.0
    factor = _power_ratio(b, a, 2.0 * nu) if q.sign == PLUS else 1.0

    if regime == NU_EQ_1:
        c1 = c_const(1.0, a, b)
        return ExpansionPrediction(nu=1.0, leading=factor * c1, second_coeff=-factor * b * b * c1,
                                   second_scale='log(t)/t^2', regime=regime, sign=q.sign,
                                   near_boundary=near_boundary)

    c = c_const(nu, a, b)
    if regime == NU_LT_1:
        second = _second_order_scale(nu, b) * c
        if second != 0.0:
            second *= 1.0 - nu * kappa(nu)
        return ExpansionPrediction(nu=nu, leading=factor * c, second_coeff=factor * second,
                                   second_scale='t^-2nu', regime=regime, sign=q.sign)

    upper = -(nu * c_const(nu + 1.0, a, b)
              + _power_ratio(b, 1.0, 2.0 * nu) * (a * a - b * b)
              / math.exp((nu + 1.0) * math.log(2.0) + math.log(nu - 1.0) + log_gamma(nu)))
    if factor == 0.0:
        bounds = Interval(0.0, 0.0)
    else:
        bounds = Interval(-math.inf, factor * upper)
    return ExpansionPrediction(nu=nu, leading=factor * c, second_coeff=bounds,
                               second_scale='t^-(nu+1)', regime=regime, sign=q.sign)

IParts = namedtuple('IParts', ['I', 'I1', 'I2', 'I3', 'direct'])

def _density_term(nu, x, t):
    """x^(2nu) e^(-x^2/2t) / ((2t)^nu Gamma(nu+1)), in log space."""
    if x == 0.0:
        return 0.0
    return math.exp(2.0 * nu * math.log(x) - x * x / (2.0 * t)
                    - nu * math.log(2.0 * t) - log_gamma(nu + 1.0))

def i_parts(nu, a, b, t):
    """I(t) = (T_a - T_b) / (1 - T_b) with T_x = tau0_tail(nu, x, t), split in three.

    I1 collects the density terms, I2 the index nu+1 tails and I3 the
    conditioning correction; 'direct' is the ratio form computed on its own.
    """
    nu = _check_nu(nu)
    a, b = _check_levels(a, b)
    t = _check_time(t)

    ta = tau0_tail(nu, a, t)
    tb = tau0_tail(nu, b, t)
    survive_b = reg_gamma_q(nu, b * b / (2.0 * t)) if b > 0.0 else 1.0
    if survive_b < TAIL_FLOOR:
        raise UnderflowError('P_b(tau_0 <= t) underflows at nu=%r, b=%r, t=%r' % (nu, b, t))

    i1 = _density_term(nu, a, t) - _density_term(nu, b, t)
    i2 = tau0_tail(nu + 1.0, a, t) - tau0_tail(nu + 1.0, b, t)
    i3 = tb / survive_b * (ta - tb)
    direct = (ta - tb) / survive_b
    return IParts(i1 + i2 + i3, i1, i2, i3, direct)

def iasympt_prediction(nu, a, b, t):
    """Two-term expansion of I(t) in the regime of nu."""
    nu = _check_nu(nu)
    a, b = _check_levels(a, b)
    t = _check_time(t)
    regime = regime_of(nu)
    if regime == NU_EQ_1:
        c1 = c_const(1.0, a, b)
        return c1 / t - c1 * c1 / (2.0 * t * t)
    c = c_const(nu, a, b)
    if regime == NU_LT_1:
        return c * t ** (-nu) + _second_order_scale(nu, b) * c * t ** (-2.0 * nu)
    return c * t ** (-nu) - nu * c_const(nu + 1.0, a, b) * t ** (-nu - 1.0)

def iasympt_check(nu, a, b, t):
    """I(t) minus its two-term expansion."""
    return i_parts(nu, a, b, t).direct - iasympt_prediction(nu, a, b, t)

def iasympt_order(nu):
    """Decay exponent of iasympt_check: t^-min(3nu, nu+1), t^-3 or t^-min(2nu, nu+2)."""
    regime = regime_of(nu)
    if regime == NU_EQ_1:
        return 3.0
    if regime == NU_LT_1:
        return min(3.0 * nu, nu + 1.0)
    return min(2.0 * nu, nu + 2.0)

def halfindex_exact(a, b, t):
    """P_a(t < tau_b < inf) under index +1/2."""
    a, b = _check_levels(a, b)
    t = _check_time(t)
    return (b / a) * erf((a - b) / math.sqrt(2.0 * t))

def halfindex_minus_tail(a, b, t):
    """P_a(tau_b > t) under index -1/2 (Brownian motion started at a)."""
    a, b = _check_levels(a, b)
    t = _check_time(t)
    return erf((a - b) / math.sqrt(2.0 * t))

#
# Infimum functionals
#

def _z_mixture(nu, a, f, breakpoints=()):
    """int_0^a z^(2nu-1) f(z) dz * keyprop_coefficient, with s = (z/a)^(2nu)."""
    two_nu = 2.0 * nu

    def integrand(s):
        return f(a * s ** (1.0 / two_nu))

    cuts = sorted({0.0, 1.0} | {(float(z) / a) ** two_nu for z in breakpoints if 0.0 < z < a})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += integrate(integrand, lo, hi, tol=1e-12).value
    return total * math.exp(-nu * math.log(2.0) - log_gamma(nu + 1.0))

def rho_limits(nu, a, b):
    """(lim t^nu P(I_t - I_inf > b), lim t^nu P(rho_inf > t)) under index +nu."""
    nu = _check_nu(nu)
    a = float(a)
    b = float(b)
    if not a > 0.0 or not 0.0 <= b <= a:
        raise DomainError('need 0 <= b <= a, got a=%r, b=%r' % (a, b))
    two_nu = 2.0 * nu

    def gap(z):
        return np.clip(z - b, 0.0, None) ** two_nu

    tcor1 = _z_mixture(nu, a, gap, breakpoints=(b,)) if b < a else 0.0
    tcor2 = math.exp(two_nu * math.log(a) - (nu + 1.0) * math.log(2.0) - log_gamma(nu + 1.0))
    return tcor1, tcor2

KEYPROP = 'keyprop'
TCOR_II = 'tcor_ii'

def functional_limit(nu, a, f, kind=KEYPROP, breakpoints=()):
    """Limit of t^nu E[f(I_t) R_t^(-2nu)] ('keyprop') or of
    t^nu (E[g(I_inf)] - E[g(I_t)]) ('tcor_ii') under index +nu.

    breakpoints lists discontinuities of f inside (0, a).
    """
    nu = _check_nu(nu)
    a = float(a)
    if not a > 0.0:
        raise DomainError('start must be > 0, got %r' % a)
    if kind == KEYPROP:
        return _z_mixture(nu, a, f, breakpoints)
    if kind == TCOR_II:
        a2nu = a ** (2.0 * nu)

        def weighted(z):
            return (a2nu - 2.0 * z ** (2.0 * nu)) * f(z)
        return _z_mixture(nu, a, weighted, breakpoints)
    raise DomainError('unknown functional kind %r' % kind)

def convolution_identity_sides(c, alpha, beta, x):
    """Both sides of

        int_c^x dy / (y^alpha (x+c-y)^beta)
          = (c(x+c))^(1-alpha-beta) int_c^x (y+c)^(alpha+beta-2) (c^alpha/y^alpha + c^beta/y^beta) dy
    """
    c, alpha, beta, x = float(c), float(alpha), float(beta), float(x)
    if not c > 0.0:
        raise DomainError('c must be > 0, got %r' % c)
    if not x >= c:
        raise DomainError('need x >= c, got c=%r, x=%r' % (c, x))
    if x == c:
        return 0.0, 0.0

    def left(y):
        return y ** -alpha * (x + c - y) ** -beta

    def right(y):
        return (y + c) ** (alpha + beta - 2.0) * ((c / y) ** alpha + (c / y) ** beta)

    lhs = integrate(left, c, x, tol=1e-13, rel_tol=1e-12).value
    rhs = integrate(right, c, x, tol=1e-13, rel_tol=1e-12).value
    rhs *= (c * (x + c)) ** (1.0 - alpha - beta)
    return lhs, rhs
