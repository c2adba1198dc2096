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

"""Samplers for hitting times and infimum functionals, and Monte Carlo estimates.

Hitting times at a level b > 0 are simulated through the exponential time
change: log R is a Brownian motion with drift +nu (index +nu) or -nu (index
-nu), run on the clock A = int exp(2 W) ds. Crossing the level b by R is
crossing log b by W, so Brownian-bridge formulas apply between steps.

Every estimate is split into fixed-size chunks, each with its own RngStream;
chunk statistics are combined in chunk order, so results do not depend on
how many threads ran the chunks.
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from BesselHitting.closed_form import MINUS, PLUS, SignedIndex, tau0_tail
from BesselHitting.numerics import DomainError
from BesselHitting.threading import getWorkerPool

__all__ = ['TruncationError', 'CensoringError', 'AbsorptionError', 'RngStream', 'EulerConfig',
           'McEstimate', 'HitBatch', 'ConvolutionEstimate', 'gamma_sample', 'gamma_samples',
           'tau0_sample', 'tau0_samples', 'hitting_sample', 'hitting_samples', 'z_sample',
           'z_samples', 'rho_inf_sample', 'rho_inf_samples', 'transient_endpoint_samples',
           'walk_to_clock', 'conditioned_expectation', 'plain_expectation', 'keyprop_estimate',
           'estimate_tail', 'estimate_rho_tail', 'convolution_estimate']

CHUNK_SIZE = 8192

class TruncationError(RuntimeError):
    """A path ran out of steps before hitting; partial_clock is the time reached."""

    def __init__(self, message, partial_clock):
        RuntimeError.__init__(self, message)
        self.partial_clock = partial_clock

class CensoringError(RuntimeError):
    """Too many paths of an estimate were truncated."""

    def __init__(self, message, fraction):
        RuntimeError.__init__(self, message)
        self.fraction = fraction

class AbsorptionError(RuntimeError):
    """Every path was absorbed at zero, nothing is left to reweight."""

class RngStream(object):
    """A reproducible random stream identified by (seed, stream_id).

    Streams are Philox generators keyed through a SeedSequence spawn key, so
    child streams of one parent never overlap and any schedule of chunks
    reproduces the same numbers.
    """

    def __init__(self, seed, stream_id=0, substream=None):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.substream = substream
        key = (self.stream_id,) if substream is None else (self.stream_id, int(substream))
        self.gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=key)))

    def child(self, index):
        return RngStream(self.seed, self.stream_id, index)

    def fresh(self):
        """The same stream, rewound to its start."""
        return RngStream(self.seed, self.stream_id, self.substream)

    @property
    def fingerprint(self):
        return '%d:%d' % (self.seed, self.stream_id)

    def __repr__(self):
        return 'RngStream(seed=%d, stream_id=%d, substream=%r)' % (self.seed, self.stream_id, self.substream)

def _generator(rng):
    if isinstance(rng, RngStream):
        return rng.gen
    return rng

@dataclass(frozen=True)
class EulerConfig:
    """Discretisation of the log-clock walk.

    dt is the step of the Brownian clock, not of real time. escape_barrier is
    the height above log(a) at which index +nu paths are declared to never
    come back; censor_fraction is the share of truncated paths an estimate
    tolerates. radial_dt is the real-time step of the squared-radius Euler
    scheme (None means 1e-4 * t).
    """
    dt: float = 1e-3
    bridge_correction: bool = True
    max_steps: int = 10000000
    escape_barrier: float = 20.0
    censor_fraction: float = 1e-3
    radial_dt: float = None

    def __post_init__(self):
        if not self.dt > 0.0:
            raise DomainError('dt must be > 0, got %r' % self.dt)
        if self.max_steps < 1:
            raise DomainError('max_steps must be >= 1, got %r' % self.max_steps)
        if not self.escape_barrier > 0.0:
            raise DomainError('escape_barrier must be > 0, got %r' % self.escape_barrier)

@dataclass(frozen=True)
class McEstimate:
    n: int
    mean: float
    variance: float
    ci95: float
    seeds: str

    @classmethod
    def from_moments(cls, n, mean, variance, seeds):
        if n < 1:
            raise DomainError('an estimate needs at least one sample')
        return cls(n, mean, variance, 1.96 * math.sqrt(variance / n), seeds)

    def within(self, value, sigmas=4.0, allowance=0.0):
        """True when |mean - value| <= sigmas * sd + allowance."""
        return abs(self.mean - value) <= sigmas * math.sqrt(self.variance / self.n) + allowance

    def as_dict(self):
        return {'n': self.n, 'mean': self.mean, 'variance': self.variance,
                'ci95': self.ci95, 'seeds': self.seeds}

HitBatch = namedtuple('HitBatch', ['times', 'censored'])

ConvolutionEstimate = namedtuple('ConvolutionEstimate', ['total', 'window'])

#
# Moment bookkeeping
#

class _Moments(object):
    """Running (count, mean, M2) combined in a fixed order."""

    def __init__(self, n=0, mean=0.0, m2=0.0):
        self.n = n
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(int(values.size), mean, float(((values - mean) ** 2).sum()))

    def add(self, other):
        if other.n == 0:
            return self
        if self.n == 0:
            return _Moments(other.n, other.mean, other.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return _Moments(n, mean, m2)

    def estimate(self, seeds):
        variance = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return McEstimate.from_moments(self.n, self.mean, variance, seeds)

def _chunk_sizes(n):
    return [min(CHUNK_SIZE, n - start) for start in range(0, n, CHUNK_SIZE)]

def _run_chunks(kernel, n, rng, parallelism):
    """kernel(size, generator) for every chunk, results in chunk order."""
    if not isinstance(rng, RngStream):
        raise DomainError('chunked estimates need an RngStream, got %r' % (rng,))
    jobs = [(rng.child(i), size) for i, size in enumerate(_chunk_sizes(n))]

    def job(stream, size):
        return kernel(size, stream.gen)

    if parallelism is not None and parallelism > 1:
        return getWorkerPool(parallelism).map_streams(job, jobs)
    return [job(*j) for j in jobs]

def _seeds(rng, n):
    return '%s/%d' % (rng.fingerprint, len(_chunk_sizes(n)))

def _reduce(chunks, censor_fraction, rng, n, what):
    """Combines per-chunk (values, censored count) into one McEstimate."""
    moments = _Moments()
    censored = 0
    for values, lost in chunks:
        moments = moments.add(_Moments.of(values))
        censored += lost
    fraction = censored / float(n)
    if fraction > censor_fraction:
        raise CensoringError('%s: %d of %d paths truncated (%.3g%% > %.3g%%)'
                             % (what, censored, n, 100 * fraction, 100 * censor_fraction), fraction)
    if censored:
        logging.warning('%s: dropped %d truncated paths', what, censored)
    return moments.estimate(_seeds(rng, n))

def _check_n(n):
    n = int(n)
    if n < 1:
        raise DomainError('sample size must be >= 1, got %r' % n)
    return n

#
# Exact samplers
#

def gamma_samples(shape, size, rng):
    """gamma(shape, 1) draws by Marsaglia-Tsang squeeze and rejection."""
    shape = float(shape)
    if not shape > 0.0:
        raise DomainError('gamma shape must be > 0, got %r' % shape)
    gen = _generator(rng)
    boost = shape < 1.0
    s = shape + 1.0 if boost else shape
    d = s - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)

    out = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        x = gen.standard_normal(todo.size)
        u = gen.random(todo.size)
        v = (1.0 + c * x) ** 3
        positive = v > 0.0
        logv = np.log(np.where(positive, v, 1.0))
        x2 = x * x
        accept = positive & ((u < 1.0 - 0.0331 * x2 * x2)
                             | (np.log(u) < 0.5 * x2 + d * (1.0 - v + logv)))
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]

    if boost:
        # gamma_s = gamma_{s+1} U^(1/s)
        out *= (1.0 - gen.random(size)) ** (1.0 / shape)
    return out

def gamma_sample(shape, rng):
    return float(gamma_samples(shape, 1, rng)[0])

def tau0_samples(nu, a, size, rng):
    """tau_0 under index -nu from a, as a^2 / (2 gamma_nu)."""
    if not a > 0.0:
        raise DomainError('start must be > 0, got %r' % a)
    return a * a / (2.0 * gamma_samples(nu, size, rng))

def tau0_sample(nu, a, rng):
    return float(tau0_samples(nu, a, 1, rng)[0])

def z_samples(nu, a, size, rng):
    """Levels with density (2nu / a^(2nu)) z^(2nu-1) on (0, a)."""
    if not nu > 0.0 or not a > 0.0:
        raise DomainError('need nu > 0 and a > 0, got nu=%r, a=%r' % (nu, a))
    u = 1.0 - _generator(rng).random(size)
    return a * u ** (1.0 / (2.0 * nu))

def z_sample(nu, a, rng):
    return float(z_samples(nu, a, 1, rng)[0])

def transient_endpoint_samples(nu, a, t, rng, size):
    """R_t under index +nu: R_t^2 / t is noncentral chi-square(2nu+2, a^2/t)."""
    if not nu > 0.0 or not a > 0.0 or not t > 0.0:
        raise DomainError('need nu, a, t > 0, got nu=%r, a=%r, t=%r' % (nu, a, t))
    gen = _generator(rng)
    return np.sqrt(t * gen.noncentral_chisquare(2.0 * nu + 2.0, a * a / t, size))

#
# Log-clock walks
#

def _walk_to_levels(drift, a, levels, cfg, gen, cap=None):
    """Runs one log-clock walk per entry of `levels` (all below a) and
    returns their crossing clocks as a HitBatch."""
    size = levels.size
    dt = cfg.dt
    sdt = math.sqrt(dt)
    top = math.log(a) + cfg.escape_barrier

    times = np.full(size, np.inf)
    censored = np.zeros(size, dtype=bool)
    idx = np.arange(size)
    level = np.log(levels)
    w = np.full(size, math.log(a))
    clock = np.zeros(size)

    steps = 0
    while idx.size:
        if steps >= cfg.max_steps:
            censored[idx] = True
            times[idx] = clock
            break
        steps += 1

        m = idx.size
        w1 = w + drift * dt + sdt * gen.standard_normal(m)
        d0 = w - level
        d1 = w1 - level
        theta = np.zeros(m)
        hit = d1 <= 0.0
        if hit.any():
            theta[hit] = d0[hit] / (d0[hit] - d1[hit])
        if cfg.bridge_correction:
            u = gen.random(m)
            bridge = ~hit & (u < np.exp(-2.0 * d0 * np.maximum(d1, 0.0) / dt))
            if bridge.any():
                theta[bridge] = d0[bridge] / (d0[bridge] + d1[bridge])
            hit |= bridge

        e0 = np.exp(2.0 * w)
        if hit.any():
            # clock up to the crossing, with exp(2 log b) = b^2 at the crossing end
            times[idx[hit]] = clock[hit] + theta[hit] * dt * 0.5 * (e0[hit] + np.exp(2.0 * level[hit]))

        clock = clock + 0.5 * dt * (e0 + np.exp(2.0 * np.minimum(w1, top + 1.0)))
        w = w1
        keep = ~hit

        if drift > 0.0:
            keep &= w < top

        if cap is not None:
            over = keep & (clock > cap)
            if over.any():
                over_idx = np.flatnonzero(over)
                times[idx[over_idx]] = clock[over_idx]
                if drift > 0.0:
                    # from height w the path ever returns to the level with probability exp(-2 nu (w - level))
                    returns = gen.random(over_idx.size) < np.exp(-2.0 * drift * (w[over_idx] - level[over_idx]))
                    times[idx[over_idx[~returns]]] = np.inf
                keep &= ~over

        idx, w, clock, level = idx[keep], w[keep], clock[keep], level[keep]

    return HitBatch(times, censored)

def hitting_samples(nu, sign, a, b, size, cfg, rng, cap=None):
    """tau_b draws for `size` independent paths started at a.

    Paths whose clock passes `cap` stop there: their entry is the clock value
    reached (a lower bound on tau_b) or inf when, for the plus sign, the path
    never returns to b. Paths still running after cfg.max_steps are marked
    censored and carry their partial clock.
    """
    index = SignedIndex(nu, sign)
    if not 0.0 < b < a:
        raise DomainError('need 0 < b < a, got a=%r, b=%r' % (a, b))
    return _walk_to_levels(index.drift, a, np.full(size, float(b)), cfg, _generator(rng), cap)

def hitting_sample(nu, a, b, cfg, rng, sign=MINUS):
    """One tau_b draw; inf when an index +nu path escapes."""
    batch = hitting_samples(nu, sign, a, b, 1, cfg, rng)
    if batch.censored[0]:
        raise TruncationError('no crossing of b=%r within %d steps' % (b, cfg.max_steps),
                              float(batch.times[0]))
    return float(batch.times[0])

def rho_inf_samples(nu, a, size, cfg, rng, cap=None):
    """rho_inf under index +nu: tau_Z under index -nu with Z from z_samples."""
    gen = _generator(rng)
    levels = z_samples(nu, a, size, gen)
    return _walk_to_levels(SignedIndex(nu, MINUS).drift, a, levels, cfg, gen, cap)

def rho_inf_sample(nu, a, cfg, rng):
    batch = rho_inf_samples(nu, a, 1, cfg, rng)
    if batch.censored[0]:
        raise TruncationError('rho_inf draw truncated after %d steps' % cfg.max_steps,
                              float(batch.times[0]))
    return float(batch.times[0])

def walk_to_clock(nu, a, t, size, cfg, rng):
    """(R_t, I_t, censored) under index +nu.

    The walk runs until its clock reaches t; the running minimum takes the
    exact Brownian-bridge minimum of every step.
    """
    if not nu > 0.0 or not a > 0.0 or not t > 0.0:
        raise DomainError('need nu, a, t > 0, got nu=%r, a=%r, t=%r' % (nu, a, t))
    gen = _generator(rng)
    dt = cfg.dt
    sdt = math.sqrt(dt)

    end = np.full(size, math.log(a))
    low = np.full(size, math.log(a))
    censored = np.zeros(size, dtype=bool)
    idx = np.arange(size)
    w = np.full(size, math.log(a))
    running_min = w.copy()
    clock = np.zeros(size)

    steps = 0
    while idx.size:
        if steps >= cfg.max_steps:
            censored[idx] = True
            end[idx] = w
            low[idx] = running_min
            break
        steps += 1

        m = idx.size
        w1 = w + nu * dt + sdt * gen.standard_normal(m)
        u = 1.0 - gen.random(m)
        bridge_min = 0.5 * (w + w1 - np.sqrt((w1 - w) ** 2 - 2.0 * dt * np.log(u)))
        inc = 0.5 * dt * (np.exp(2.0 * w) + np.exp(2.0 * w1))

        done = clock + inc >= t
        if done.any():
            theta = (t - clock[done]) / inc[done]
            end[idx[done]] = w[done] + theta * (w1[done] - w[done])
            low[idx[done]] = np.minimum(running_min[done], bridge_min[done])

        running_min = np.minimum(running_min, bridge_min)
        clock = clock + inc
        w = w1
        keep = ~done
        idx, w, clock, running_min = idx[keep], w[keep], clock[keep], running_min[keep]

    return np.exp(end), np.exp(low), censored

#
# Estimates
#

def conditioned_expectation(nu, a, t, s, f, n, cfg, rng):
    """E_a[f(R_t) | tau_0 > s] under index -nu.

    Euler paths of the squared radius X = R^2 (dX = 2(1 - nu) dt + 2 sqrt(X) dW)
    run to t, absorbed once X <= 0; survivors are weighted by
    P_{R_t}(tau_0 > s - t) and the weighted mean is a ratio estimator.
    """
    if not s > t > 0.0:
        raise DomainError('need s > t > 0, got t=%r, s=%r' % (t, s))
    n = _check_n(n)
    gen = _generator(rng)
    dt = cfg.radial_dt if cfg.radial_dt is not None else 1e-4 * t
    steps = int(math.ceil(t / dt))
    dt = t / steps
    delta = 2.0 * (1.0 - nu)

    x = np.full(n, a * a)
    alive = np.ones(n, dtype=bool)
    for _ in range(steps):
        noise = gen.standard_normal(n)
        x = x + delta * dt + 2.0 * np.sqrt(np.maximum(x, 0.0) * dt) * noise
        alive &= x > 0.0
    survivors = np.flatnonzero(alive)
    if survivors.size == 0:
        raise AbsorptionError('all %d paths absorbed before t=%r; use a larger n or a smaller t' % (n, t))

    r = np.sqrt(x[survivors])
    weights = np.array([tau0_tail(nu, ri, s - t) for ri in r])
    total = weights.sum()
    if not total > 0.0:
        raise AbsorptionError('survival weights underflow at s - t = %r' % (s - t))
    values = np.asarray(f(r), dtype=float) * np.ones_like(r)
    mean = float(np.dot(weights, values) / total)
    spread = float(np.dot(weights ** 2, (values - mean) ** 2))
    variance = n * spread / (total * total)
    seeds = rng.fingerprint if isinstance(rng, RngStream) else 'generator'
    logging.info('ConditionedExpectation[nu=%g, a=%g, t=%g, s=%g]: %d of %d paths survive',
                 nu, a, t, s, survivors.size, n)
    return McEstimate.from_moments(n, mean, variance, seeds)

def plain_expectation(nu, a, t, f, n, rng, parallelism=1):
    """E_a[f(R_t)] under index +nu from exact endpoint draws."""
    n = _check_n(n)

    def kernel(size, gen):
        r = transient_endpoint_samples(nu, a, t, gen, size)
        return np.asarray(f(r), dtype=float) * np.ones_like(r), 0

    return _reduce(_run_chunks(kernel, n, rng, parallelism), 1.0, rng, n, 'PlainExpectation')

def keyprop_estimate(nu, a, t, f, n, cfg, rng, parallelism=1):
    """t^nu E_a[f(I_t) R_t^(-2nu)] under index +nu."""
    n = _check_n(n)
    scale = t ** nu

    def kernel(size, gen):
        r, low, censored = walk_to_clock(nu, a, t, size, cfg, gen)
        ok = ~censored
        values = scale * np.asarray(f(low[ok]), dtype=float) * r[ok] ** (-2.0 * nu)
        return values, int(censored.sum())

    return _reduce(_run_chunks(kernel, n, rng, parallelism), cfg.censor_fraction, rng, n,
                   'KeypropEstimate[nu=%g, a=%g, t=%g]' % (nu, a, t))

def estimate_tail(nu, sign, a, b, t, n, cfg, rng, parallelism=1):
    """P(tau_b > t) for the minus sign, P(t < tau_b < inf) for the plus sign."""
    index = SignedIndex(nu, sign)
    n = _check_n(n)
    if n < 100:
        raise DomainError('estimate_tail needs n >= 100, got %r' % n)
    if not 0.0 <= b < a or not t > 0.0:
        raise DomainError('need 0 <= b < a and t > 0, got a=%r, b=%r, t=%r' % (a, b, t))
    what = 'EstimateTail[nu=%g, %s, a=%g, b=%g, t=%g]' % (nu, sign, a, b, t)

    if b == 0.0:
        if index.sign == PLUS:
            # I_inf > 0 almost surely, tau_0 = inf
            return McEstimate.from_moments(n, 0.0, 0.0, _seeds(rng, n))

        def kernel(size, gen):
            return (tau0_samples(nu, a, size, gen) > t).astype(float), 0
    else:
        def kernel(size, gen):
            batch = hitting_samples(nu, sign, a, b, size, cfg, gen, cap=t)
            ok = ~batch.censored
            times = batch.times[ok]
            if sign == PLUS:
                values = (times > t) & np.isfinite(times)
            else:
                values = times > t
            return values.astype(float), int(batch.censored.sum())

    estimate = _reduce(_run_chunks(kernel, n, rng, parallelism), cfg.censor_fraction, rng, n, what)
    logging.info('%s: %.6g +- %.3g', what, estimate.mean, estimate.ci95)
    return estimate

def estimate_rho_tail(nu, a, t, n, cfg, rng, parallelism=1):
    """P(rho_inf > t) under index +nu."""
    n = _check_n(n)

    def kernel(size, gen):
        batch = rho_inf_samples(nu, a, size, cfg, gen, cap=t)
        ok = ~batch.censored
        return (batch.times[ok] > t).astype(float), int(batch.censored.sum())

    return _reduce(_run_chunks(kernel, n, rng, parallelism), cfg.censor_fraction, rng, n,
                   'RhoTail[nu=%g, a=%g, t=%g]' % (nu, a, t))

def convolution_estimate(nu, a, b, t, n, cfg, rng, parallelism=1):
    """P(S + U > t) and P(S + U > t, S <= t, U <= t) for S = tau_b from a and
    an independent U = tau_0 from b, both under index -nu."""
    n = _check_n(n)

    def kernel(size, gen):
        batch = hitting_samples(nu, MINUS, a, b, size, cfg, gen, cap=t)
        u = tau0_samples(nu, b, size, gen)
        ok = ~batch.censored
        s, u = batch.times[ok], u[ok]
        total = s + u > t
        window = total & (s <= t) & (u <= t)
        return (total.astype(float), window.astype(float)), int(batch.censored.sum())

    chunks = _run_chunks(kernel, n, rng, parallelism)
    what = 'Convolution[nu=%g, a=%g, b=%g, t=%g]' % (nu, a, b, t)
    total = _reduce([(values[0], lost) for values, lost in chunks], cfg.censor_fraction, rng, n, what)
    window = _reduce([(values[1], lost) for values, lost in chunks], cfg.censor_fraction, rng, n, what)
    return ConvolutionEstimate(total, window)

