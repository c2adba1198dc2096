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

"""Survival probabilities P_x(tau_b > t) under index -nu from the backward equation.

    du/dt = 1/2 u'' + (1 - 2nu)/(2x) u',   u(0, x) = 1,  u(t, b) = 0

with a zero-flux closure at x_max. The operator is discretised in flux form,
(1/(2w)) (w u')' with w(x) = x^(1-2nu) taken at cell midpoints, which gives
an M-matrix on any mesh, and stepped with a theta-scheme whose first steps
are replaced by implicit half-steps.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_banded

from BesselHitting.utils import format_float, parameter_hash

__all__ = ['InstabilityError', 'GridError', 'SurvivalGrid', 'SurvivalSolution',
           'solve_survival', 'tail_at', 'tail_curve', 'export_csv', 'solution_key']

UNIFORM = 'uniform'
GRADED = 'graded'
GEOMETRIC = 'geometric'

# graded meshes never grow faster than this from cell to cell
GRADING_FACTOR = 1.05

# level used when validation mode is asked for b = 0
VALIDATION_B = 1e-6

INSTABILITY_SLACK = 1e-6

class InstabilityError(ArithmeticError):
    """The discrete solution left [0, 1]; the grid is too coarse."""

class GridError(ValueError):
    """Invalid grid or out-of-grid query."""

@dataclass(frozen=True)
class SurvivalGrid:
    b: float
    x_max: float
    n_x: int
    t_max: float
    n_t: int
    theta: float = 0.5
    spacing: str = GRADED
    time_spacing: str = GEOMETRIC
    t_first: float = None
    rannacher_steps: int = 2

    def __post_init__(self):
        if not 0.0 <= self.b < self.x_max:
            raise GridError('need 0 <= b < x_max, got b=%r, x_max=%r' % (self.b, self.x_max))
        if self.n_x < 16 or self.n_t < 16:
            raise GridError('need n_x >= 16 and n_t >= 16, got %r, %r' % (self.n_x, self.n_t))
        if not self.t_max > 0.0:
            raise GridError('t_max must be > 0, got %r' % self.t_max)
        if not 0.0 <= self.theta <= 1.0:
            raise GridError('theta must lie in [0, 1], got %r' % self.theta)
        if self.spacing not in (UNIFORM, GRADED):
            raise GridError('unknown spacing %r' % self.spacing)
        if self.time_spacing not in (UNIFORM, GEOMETRIC):
            raise GridError('unknown time spacing %r' % self.time_spacing)
        if self.t_first is not None and not 0.0 < self.t_first < self.t_max:
            raise GridError('t_first must lie in (0, t_max), got %r' % self.t_first)

    @classmethod
    def for_query(cls, b, a, t_max, n_x=1024, n_t=1024, **kw):
        """Default grid for reads at start a up to t_max: x_max = a + 10 sqrt(t_max)."""
        return cls(b=float(b), x_max=float(a) + 10.0 * math.sqrt(t_max), n_x=int(n_x),
                   t_max=float(t_max), n_t=int(n_t), **kw)

    def with_b(self, b):
        params = asdict(self)
        params['b'] = b
        return SurvivalGrid(**params)

    def refined(self, factor=2):
        params = asdict(self)
        params['n_x'] = self.n_x * factor
        params['n_t'] = self.n_t * factor
        return SurvivalGrid(**params)

    def x_nodes(self):
        length = self.x_max - self.b
        n = self.n_x
        if self.spacing == UNIFORM:
            return np.linspace(self.b, self.x_max, n + 1)

        ratio = _grading_ratio(length, n, self._smallest_cell(length))
        if ratio == 1.0:
            return np.linspace(self.b, self.x_max, n + 1)
        steps = np.arange(n + 1) * math.log(ratio)
        nodes = self.b + length * np.expm1(steps) / math.expm1(n * math.log(ratio))
        nodes[-1] = self.x_max
        return nodes

    def _smallest_cell(self, length):
        return max(1e-4 * self.b, 1e-8 * length)

    def time_nodes(self):
        if self.time_spacing == UNIFORM:
            return np.linspace(0.0, self.t_max, self.n_t + 1)
        t_first = self.t_first if self.t_first is not None else 1e-6 * self.t_max
        times = np.empty(self.n_t + 1)
        times[0] = 0.0
        times[1:] = t_first * (self.t_max / t_first) ** (np.arange(self.n_t) / (self.n_t - 1.0))
        times[-1] = self.t_max
        return times

def _grading_ratio(length, n, smallest):
    """Cell growth ratio r <= GRADING_FACTOR whose first cell is about `smallest`."""
    if length / n <= smallest:
        return 1.0
    limit = min(GRADING_FACTOR, math.exp(600.0 / n))

    def first_cell(r):
        return length * (r - 1.0) / math.expm1(n * math.log(r))

    if first_cell(limit) >= smallest:
        return limit
    lo, hi = 1.0 + 1e-12, limit
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if first_cell(mid) > smallest:
            lo = mid
        else:
            hi = mid
    return lo

@dataclass
class SurvivalSolution:
    grid: SurvivalGrid
    nu: float
    x: np.ndarray
    times: np.ndarray
    u: np.ndarray

    sign = 'minus'

    @property
    def b(self):
        return self.grid.b

def solution_key(nu, grid):
    return parameter_hash({'nu': float(nu), 'grid': asdict(grid)})

def _operator(x, nu):
    """Tridiagonal (lower, diag, upper) of the flux-form generator on nodes x[1:]."""
    h = np.diff(x)
    power = 1.0 - 2.0 * nu
    w_mid = (0.5 * (x[:-1] + x[1:])) ** power
    w_node = x[1:] ** power

    left = w_mid / h
    right = np.append(w_mid[1:] / h[1:], 0.0)
    volume = 0.5 * (h + np.append(h[1:], 0.0))
    scale = 1.0 / (2.0 * w_node * volume)

    lower = scale * left
    upper = scale * right
    diag = -(lower + upper)
    return lower, diag, upper

def _apply(lower, diag, upper, v):
    out = diag * v
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    return out

def _step(lower, diag, upper, v, dt, theta):
    rhs = v + (1.0 - theta) * dt * _apply(lower, diag, upper, v) if theta < 1.0 else v.copy()
    ab = np.empty((3, v.size))
    ab[0, 0] = 0.0
    ab[0, 1:] = -theta * dt * upper[:-1]
    ab[1] = 1.0 - theta * dt * diag
    ab[2, :-1] = -theta * dt * lower[1:]
    ab[2, -1] = 0.0
    return solve_banded((1, 1), ab, rhs, overwrite_ab=True, check_finite=False)

def solve_survival(nu, b, grid, validation=False, cache=None):
    """u[k, i] ~ P_{x_i}(tau_b > t_k) under index -nu.

    b = 0 is refused unless validation is set, in which case the level is
    moved to VALIDATION_B so the solution approximates tau_0.
    """
    nu = float(nu)
    if not nu > 0.0:
        raise GridError('index must be > 0, got %r' % nu)
    b = float(b)
    if b <= 0.0:
        if not validation:
            raise GridError('b = 0 has a closed form (closed_form.tau0_tail); '
                            'pass validation=True to solve it anyway')
        b = VALIDATION_B
    if grid.b != b:
        grid = grid.with_b(b)

    key = solution_key(nu, grid)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            logging.info('SurvivalSolver[nu=%g, b=%g]: cache hit %s', nu, b, key)
            return cached

    x = grid.x_nodes()
    if np.any(np.diff(x) <= 0.0):
        raise GridError('mesh nodes collapse in double precision; use a coarser grading or larger b')
    times = grid.time_nodes()
    lower, diag, upper = _operator(x, nu)

    logging.info('SurvivalSolver[nu=%g, b=%g]: %d cells up to x=%g, %d steps up to t=%g',
                 nu, b, grid.n_x, grid.x_max, grid.n_t, grid.t_max)

    u = np.empty((times.size, x.size))
    u[:, 0] = 0.0
    u[0, 1:] = 1.0
    v = np.ones(x.size - 1)
    smoothing = grid.rannacher_steps if grid.theta < 1.0 else 0
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        if k < smoothing:
            v = _step(lower, diag, upper, v, 0.5 * dt, 1.0)
            v = _step(lower, diag, upper, v, 0.5 * dt, 1.0)
        else:
            v = _step(lower, diag, upper, v, dt, grid.theta)
        if v.min() < -INSTABILITY_SLACK or v.max() > 1.0 + INSTABILITY_SLACK:
            raise InstabilityError('solution left [0, 1] at t=%g (min %g, max %g); refine the grid'
                                   % (times[k + 1], v.min(), v.max()))
        u[k + 1, 1:] = v

    sol = SurvivalSolution(grid, nu, x, times, u)
    if cache is not None:
        cache.put(key, sol)
    return sol

def _bracket(nodes, value, what):
    if not nodes[0] <= value <= nodes[-1]:
        raise GridError('%s=%r outside the grid [%r, %r]' % (what, value, nodes[0], nodes[-1]))
    j = int(np.searchsorted(nodes, value, side='right')) - 1
    j = min(max(j, 0), nodes.size - 2)
    weight = (value - nodes[j]) / (nodes[j + 1] - nodes[j])
    return j, weight

def tail_at(sol, x, t):
    """Bilinear interpolation of the solution, clamped to [0, 1]."""
    i, wx = _bracket(sol.x, float(x), 'x')
    k, wt = _bracket(sol.times, float(t), 't')
    u = sol.u
    below = (1.0 - wx) * u[k, i] + wx * u[k, i + 1]
    above = (1.0 - wx) * u[k + 1, i] + wx * u[k + 1, i + 1]
    return min(1.0, max(0.0, (1.0 - wt) * below + wt * above))

def tail_curve(sol, a, times):
    """tail_at(sol, a, t) for every t in times."""
    return [tail_at(sol, a, t) for t in times]

def export_csv(sol, path):
    """Writes t,x,u rows with 17 significant digits."""
    with open(path, 'w', newline='') as fd:
        writer = csv.writer(fd, lineterminator='\n')
        writer.writerow(['t', 'x', 'u'])
        for k, t in enumerate(sol.times):
            tt = format_float(t)
            for i, x in enumerate(sol.x):
                writer.writerow([tt, format_float(x), format_float(sol.u[k, i])])
