"""Weight accumulation, importance estimators and path-space samplers.

All weight arithmetic is carried in the log domain; sums of weights go
through a log-sum-exp reduction so a single heavy path cannot overflow the
accumulator. Reductions always run in replicate-index order, which keeps
results bit-identical however replicates were produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .paths import EstimateReport, GridPath, Path, PiecewiseConstantPath, WeightedPath
from .rng import stream

__all__ = [
    "Adaptive",
    "ClosedForm",
    "LeftRiemann",
    "MHResult",
    "OracleTable",
    "accumulate_log_weight",
    "adaptive_simpson",
    "importance_estimate",
    "log_ess",
    "mh_independence_chain",
    "pcn_step",
    "sup_v_diagnostic",
]


# -- quadrature rules ---------------------------------------------------------


@dataclass(frozen=True)
class ClosedForm:
    """Integrate with a backend-supplied antiderivative.

    interval_integral(s0, s1, state) must return the exact integral of the
    weight integrand over [s0, s1] while the path sits in `state`.
    """

    interval_integral: Callable[[float, float, object], float]


@dataclass(frozen=True)
class Adaptive:
    """Adaptive composite Simpson quadrature to an absolute tolerance."""

    tol: float = 1e-9


@dataclass(frozen=True)
class LeftRiemann:
    """Left-point Riemann sum on the path's own grid (grid paths only)."""


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 48) -> float:
    """Integrate a vectorized scalar function over [a, b].

    Interval-bisecting Simpson: each interval is accepted once the
    Richardson error estimate |S2 - S| / 15 drops below its share of the
    tolerance. f must accept a numpy array of abscissae.
    """
    if b <= a:
        return 0.0
    # stack entries: (a, fa, fm, fb, whole, tol, depth)
    m0 = 0.5 * (a + b)
    fa, fm, fb = (float(v) for v in np.asarray(f(np.array([a, m0, b])), dtype=float))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a0, b0, fa, fm, fb, whole, tol0, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        lm = 0.5 * (a0 + m)
        rm = 0.5 * (m + b0)
        flm, frm = (float(v) for v in np.asarray(f(np.array([lm, rm])), dtype=float))
        left = (m - a0) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b0 - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if not math.isfinite(err):
            return math.nan
        if depth >= max_depth or abs(err) <= 15.0 * tol0:
            total += left + right + err / 15.0
        else:
            stack.append((a0, m, fa, flm, fm, left, 0.5 * tol0, depth + 1))
            stack.append((m, b0, fm, frm, fb, right, 0.5 * tol0, depth + 1))
    return total


def accumulate_log_weight(path: Path, integrand, rule) -> float:
    """Time integral of `integrand` along a path.

    Piecewise-constant paths integrate interval by interval with the state
    frozen (closed form when the backend registered one, else adaptive
    Simpson). Grid paths use a left-point Riemann sum, matching the Euler
    discretization that produced them. Returns nan when any contribution is
    non-finite; callers flag such paths invalid rather than dropping them.
    """
    if isinstance(path, PiecewiseConstantPath):
        if isinstance(rule, LeftRiemann):
            raise ValueError("Riemann rule applies to grid paths only")
        total = 0.0
        for s0, s1, x in path.intervals():
            if s1 <= s0:
                continue
            if isinstance(rule, ClosedForm):
                part = rule.interval_integral(s0, s1, x)
            elif isinstance(rule, Adaptive):
                part = adaptive_simpson(lambda s, x=x: integrand(s, x), s0, s1, rule.tol)
            else:
                raise TypeError(f"unknown quadrature rule {rule!r}")
            total += part
            if not math.isfinite(total):
                return math.nan
        return total
    if isinstance(path, GridPath):
        if not isinstance(rule, LeftRiemann):
            raise ValueError("grid paths integrate with the left-point Riemann rule")
        dt = np.diff(path.times)
        vals = np.array(
            [integrand(float(path.times[i]), path.values[i]) for i in range(dt.shape[0])],
            dtype=float,
        )
        total = float(np.sum(vals * dt))
        return total if math.isfinite(total) else math.nan
    raise TypeError(f"unsupported path type {type(path)!r}")


# -- importance estimators ----------------------------------------------------


def _logsumexp(a: np.ndarray) -> float:
    if a.size == 0:
        return -math.inf
    m = np.max(a)
    if not math.isfinite(m):
        return float(m)
    return float(m + math.log(np.sum(np.exp(a - m))))


def log_ess(log_weights: np.ndarray) -> float:
    """log of (sum w)^2 / sum w^2, the effective sample size."""
    lw = np.asarray(log_weights, dtype=float)
    return 2.0 * _logsumexp(lw) - _logsumexp(2.0 * lw)


def importance_estimate(
    paths: Sequence[WeightedPath],
    f: Callable[[Path], float],
    normalization: str = "self_normalized",
    log_h0: Optional[float] = None,
    log_htilde0: Optional[float] = None,
    extra_log_constant: float = 0.0,
) -> EstimateReport:
    """Importance-sampling estimate of E[f] under the conditioned law.

    normalization="exact_h0" rescales every weight by
    exp(log_htilde0 - log_h0 + extra_log_constant), the closed-form
    likelihood-ratio prefactor, giving an unbiased estimate (whose value for
    f == 1 should be 1, a useful correctness probe). "self_normalized"
    divides by the weight sum instead, requiring no such oracle; its standard
    error comes from the delta method. Invalid paths contribute nothing but
    are counted in the report.
    """
    valid = [p for p in paths if not p.invalid]
    invalid_count = len(paths) - len(valid)
    n = len(paths)
    if not valid:
        return EstimateReport(math.nan, math.nan, n, 0.0, invalid_count)
    lw = np.array([p.log_psi for p in valid], dtype=float)
    fv = np.array([f(p.path) for p in valid], dtype=float)
    ess = math.exp(log_ess(lw))
    if normalization == "self_normalized":
        m = float(np.max(lw))
        w = np.exp(lw - m)
        sw = float(np.sum(w))
        est = float(np.dot(w, fv) / sw)
        # delta-method variance of the ratio estimator
        var = float(np.sum((w * (fv - est)) ** 2)) / sw**2
        return EstimateReport(est, math.sqrt(var), n, ess, invalid_count)
    if normalization == "exact_h0":
        if log_h0 is None or log_htilde0 is None:
            raise ValueError("exact_h0 normalization needs log_h0 and log_htilde0")
        shift = log_htilde0 - log_h0 + extra_log_constant
        w = np.exp(lw + shift)
        if not np.all(np.isfinite(w)):
            return EstimateReport(math.nan, math.nan, n, ess, invalid_count)
        vals = w * fv
        # invalid paths enter the average as zero contribution with full count
        est = float(np.sum(vals)) / n
        var = (float(np.sum(vals**2)) / n - est**2) / max(n - 1, 1)
        return EstimateReport(est, math.sqrt(max(var, 0.0)), n, ess, invalid_count)
    raise ValueError(f"unknown normalization {normalization!r}")


# -- path-space samplers ------------------------------------------------------


@dataclass(frozen=True)
class OracleTable:
    """Exact conditioning-function values h(t, x) on a (time, state) grid.

    h_values[i, j] is h(times[i], states[j]); produced by matrix-exponential
    oracles on small state spaces, consumed by tests and exact-h0
    normalization.
    """

    times: np.ndarray     # (G,)
    states: np.ndarray    # (S,) state labels
    h_values: np.ndarray  # (G, S)

    def h(self, t: float, state) -> float:
        i = int(np.flatnonzero(np.isclose(self.times, t))[0])
        j = int(np.flatnonzero(self.states == state)[0])
        return float(self.h_values[i, j])


@dataclass(frozen=True)
class MHResult:
    chain: list
    acceptance_rate: float
    invalid_proposals: int


def mh_independence_chain(
    sampler: Callable[[], WeightedPath], n_iter: int, seed: int
) -> MHResult:
    """Independence Metropolis-Hastings on path space.

    Proposals come from `sampler` (fresh guided draws); a move is accepted
    with probability min(1, exp(log_psi' - log_psi)), which targets the
    conditioned law because the proposal density cancels. Invalid proposals
    are rejected outright and counted.
    """
    if n_iter < 1:
        raise ValueError("need at least one iteration")
    gen = stream(seed, 0)
    current = sampler()
    tries = 0
    while current.invalid:
        # a valid chain needs a valid start; resample (bounded)
        tries += 1
        if tries > 1000:
            raise RuntimeError("sampler produced 1000 invalid paths in a row")
        current = sampler()
    chain = [current]
    accepted = 0
    invalid = 0
    for _ in range(n_iter - 1):
        prop = sampler()
        if prop.invalid:
            invalid += 1
            chain.append(current)
            continue
        log_ratio = prop.log_psi - current.log_psi
        if log_ratio >= 0 or gen.random() < math.exp(log_ratio):
            current = prop
            accepted += 1
        chain.append(current)
    rate = accepted / (n_iter - 1) if n_iter > 1 else 1.0
    return MHResult(chain, rate, invalid)


def pcn_step(innovations: np.ndarray, rho: float, seed: int, index: int = 0) -> np.ndarray:
    """Preconditioned Crank-Nicolson proposal on noise increments.

    Returns rho * Z + sqrt(1 - rho^2) * xi with xi fresh standard normal of
    the same shape; this preserves the standard Gaussian reference measure,
    so the path-space MH ratio reduces to the weight difference. index
    selects the proposal stream within the run keyed by seed.
    """
    z = np.asarray(innovations, dtype=float)
    if z.ndim != 2:
        raise ValueError("innovations must be a (steps, noise_dim) array")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    xi = stream(seed, index).standard_normal(z.shape)
    return rho * z + math.sqrt(max(0.0, 1.0 - rho * rho)) * xi


# -- diagnostics --------------------------------------------------------------


def sup_v_diagnostic(path: Path, v: Callable[[float, object], float]) -> float:
    """Supremum of a space-time function along a path's sample points.

    Piecewise-constant paths evaluate v at both ends of every constancy
    interval with the interval's state (the right end evaluated by limit,
    skipping the horizon itself where v may be singular); grid paths
    evaluate at grid times before the horizon. Returns +inf if any
    evaluation is non-finite, which flags the path for the weight-validity
    bookkeeping. Monotone under path extension by construction.
    """
    best = -math.inf
    if isinstance(path, PiecewiseConstantPath):
        horizon = path.horizon
        for s0, s1, x in path.intervals():
            for s in ((s0,) if s1 >= horizon else (s0, s1)):
                val = v(s, x)
                if val != val or val == math.inf:  # nan or +inf
                    return math.inf
                if val > best:
                    best = float(val)
        return best
    if isinstance(path, GridPath):
        horizon = path.horizon
        for i in range(path.times.shape[0]):
            t = float(path.times[i])
            if t >= horizon:
                continue
            val = v(t, path.values[i])
            if val != val or val == math.inf:
                return math.inf
            if val > best:
                best = float(val)
        return best
    raise TypeError(f"unsupported path type {type(path)!r}")
