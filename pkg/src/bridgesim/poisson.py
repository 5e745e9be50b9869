"""Bridges for inhomogeneous (state-dependent) Poisson counting processes.

The target is a unit-jump counting process with state-dependent rate
lambda(x), conditioned to sit at x_end at the horizon. Guiding substitutes
the conditioning function of a constant-rate reference process, whose value
is the Poisson density of the remaining jump count:

    htilde(t, x) = (rt * (T - t))^(x_end - x) / (x_end - x)! * exp(-rt * (T - t))

on x in {x0, ..., x_end} and zero elsewhere, with rt the reference rate.
The guided process multiplies the original rate by htilde(t, x+1)/htilde(t, x)
and can be sampled exactly by inverting the time change; the log weight has
a closed-form interval antiderivative. Choosing rt <= min lambda makes the
endpoint Lyapunov drift nonpositive, so weights stay controlled.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .core import (
    Adaptive,
    ClosedForm,
    OracleTable,
    accumulate_log_weight,
    sup_v_diagnostic,
)
from .paths import PiecewiseConstantPath, WeightedPath
from .rng import stream

__all__ = [
    "InhomPoissonSpec",
    "exact_h_table",
    "guided_rate",
    "interval_log_psi",
    "log_htilde",
    "log_psi",
    "log_psi_integrand",
    "lyapunov",
    "lyapunov_drift",
    "simulate_guided_bridge",
    "transition_matrix",
]


@dataclass(frozen=True)
class InhomPoissonSpec:
    """Bridge problem: counting process from x0 to x_end over [0, horizon].

    rates[k] is lambda(x0 + k), defined on the window {x0, ..., x_end}; all
    must be positive. rate_tilde defaults to min(rates); choosing it larger
    than the minimum voids the weight-control guarantee, so that draws a
    warning, not an error.
    """

    x0: int
    x_end: int
    horizon: float
    rates: np.ndarray
    rate_tilde: Optional[float] = None

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "rates", r)
        if self.x_end < self.x0:
            raise ValueError("x_end must be >= x0 (unit up-jumps only)")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if r.shape != (self.x_end - self.x0 + 1,):
            raise ValueError("need one rate per state in {x0, ..., x_end}")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ValueError("rates must be positive and finite")
        if self.rate_tilde is None:
            object.__setattr__(self, "rate_tilde", float(np.min(r)))
        elif self.rate_tilde <= 0:
            raise ValueError("rate_tilde must be positive")
        elif self.rate_tilde > float(np.min(r)) * (1 + 1e-12):
            warnings.warn(
                "rate_tilde exceeds min(rates); the drift condition fails and "
                "weights may be heavy-tailed",
                stacklevel=2,
            )

    def rate(self, x: int) -> float:
        if not self.x0 <= x <= self.x_end:
            raise ValueError(f"state {x} outside window [{self.x0}, {self.x_end}]")
        return float(self.rates[x - self.x0])


def log_htilde(spec: InhomPoissonSpec, t: float, x: int) -> float:
    """log of the reference conditioning function; -inf outside the window."""
    if not 0.0 <= t < spec.horizon:
        raise ValueError("t must lie in [0, horizon)")
    if x < spec.x0 or x > spec.x_end:
        return -math.inf
    n = spec.x_end - x
    u = spec.rate_tilde * (spec.horizon - t)
    return n * math.log(u) - math.lgamma(n + 1) - u if n > 0 else -u


def guided_rate(spec: InhomPoissonSpec, t: float, x: int) -> float:
    """Jump rate of the guided process: lambda(x) (x_end - x) / (rt (T - t)).

    Vanishes at x_end, so the bridge can never overshoot.
    """
    if not 0.0 <= t < spec.horizon:
        raise ValueError("t must lie in [0, horizon)")
    if x == spec.x_end:
        return 0.0
    return spec.rate(x) * (spec.x_end - x) / (spec.rate_tilde * (spec.horizon - t))


def lyapunov(spec: InhomPoissonSpec) -> Callable[[float, int], float]:
    """Endpoint Lyapunov function (x_end - x) / (rt (T - t)), for sup diagnostics."""

    def v(t: float, x: int) -> float:
        return (spec.x_end - int(x)) / (spec.rate_tilde * (spec.horizon - t))

    return v


def lyapunov_drift(spec: InhomPoissonSpec, t: float, x: int) -> float:
    """Guided-generator drift of the Lyapunov function.

    Returns ((x_end - x) / (rt (T - t))) * (1 - lambda(x) / rt): zero at
    x_end and nonpositive everywhere iff rate_tilde <= min(rates).
    """
    if not 0.0 <= t < spec.horizon:
        raise ValueError("t must lie in [0, horizon)")
    if x == spec.x_end:
        return 0.0
    v = (spec.x_end - x) / (spec.rate_tilde * (spec.horizon - t))
    return v * (1.0 - spec.rate(x) / spec.rate_tilde)


def simulate_guided_bridge(spec: InhomPoissonSpec, seed: int, index: int = 0) -> WeightedPath:
    """Draw one guided bridge path, exactly (no time discretization).

    The guided rate in state x is c / (T - u) with c = lambda(x)(x_end - x)/rt,
    whose integrated hazard from t to s is c log((T-t)/(T-s)); inverting at a
    unit exponential E gives the next jump at T - s = (T - t) exp(-E / c).
    The hazard integral diverges at the horizon, so exactly x_end - x0 jumps
    land inside (0, T) almost surely. `index` selects the replicate stream
    within the run keyed by `seed`.
    """
    gen = stream(seed, index)
    t = 0.0
    jumps = []
    for x in range(spec.x0, spec.x_end):
        c = spec.rate(x) * (spec.x_end - x) / spec.rate_tilde
        while True:
            s = spec.horizon - (spec.horizon - t) * math.exp(-gen.exponential() / c)
            # float underflow can park s on t or on the horizon; both are
            # null events of the continuous law, so redraw
            if t < s < spec.horizon:
                break
        t = s
        jumps.append(t)
    states = np.arange(spec.x0, spec.x_end + 1)
    path = PiecewiseConstantPath(np.array(jumps), states, spec.horizon)
    lp = log_psi(spec, path)
    return WeightedPath(
        path=path,
        log_psi=lp,
        sup_v=sup_v_diagnostic(path, lyapunov(spec)),
        endpoint_hit=bool(path.final_state == spec.x_end),
        seed=seed,
    )


def log_psi_integrand(spec: InhomPoissonSpec) -> Callable[[float, int], float]:
    """Integrand of the log weight: (lambda(x) - rt)((x_end - x)/(rt (T - s)) - 1).

    Vectorized over the time argument.
    """

    def g(s, x):
        d = spec.rate(int(x)) - spec.rate_tilde
        n = spec.x_end - int(x)
        if n == 0:
            # constant integrand; avoids 0 * (1/(T-s)) at the horizon itself
            return -d * np.ones_like(np.asarray(s, dtype=float))
        return d * (n / (spec.rate_tilde * (spec.horizon - s)) - 1.0)

    return g


def interval_log_psi(spec: InhomPoissonSpec) -> Callable[[float, float, int], float]:
    """Closed-form integral of the log-weight integrand over one constancy interval.

    For state x on [s0, s1]:
        (lambda(x) - rt) [ ((x_end - x)/rt) log((T - s0)/(T - s1)) - (s1 - s0) ].
    The log term is dropped at x_end where its coefficient vanishes (the
    interval may then touch the horizon).
    """

    def f(s0: float, s1: float, x) -> float:
        x = int(x)
        d = spec.rate(x) - spec.rate_tilde
        n = spec.x_end - x
        out = -d * (s1 - s0)
        if n > 0:
            out += d * (n / spec.rate_tilde) * math.log(
                (spec.horizon - s0) / (spec.horizon - s1)
            )
        return out

    return f


def log_psi(spec: InhomPoissonSpec, path: PiecewiseConstantPath) -> float:
    """Log likelihood-ratio weight of a bridge path (closed form)."""
    if path.states[0] != spec.x0:
        raise ValueError("path must start at x0")
    return accumulate_log_weight(path, None, ClosedForm(interval_log_psi(spec)))


def log_psi_quadrature(spec: InhomPoissonSpec, path: PiecewiseConstantPath, tol: float = 1e-9) -> float:
    """Same weight through adaptive quadrature (consistency checks)."""
    return accumulate_log_weight(path, log_psi_integrand(spec), Adaptive(tol))


# -- matrix-exponential oracles ----------------------------------------------


def _generator(spec: InhomPoissonSpec) -> np.ndarray:
    """Generator on {x0..x_end} plus one absorbing overflow state.

    The unconditioned chain only moves up, so everything above x_end can be
    lumped into a single sink without changing hitting probabilities.
    """
    k = spec.x_end - spec.x0 + 1
    q = np.zeros((k + 1, k + 1))
    for i in range(k):
        lam = spec.rates[i]
        q[i, i] = -lam
        q[i, i + 1] = lam
    return q


def transition_matrix(spec: InhomPoissonSpec, dt: float) -> np.ndarray:
    """Exact transition probabilities over a lag dt, restricted to the window.

    Entry [i, j] is P(X_{t+dt} = x0 + j | X_t = x0 + i); the missing row mass
    sits above x_end.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    p = expm(_generator(spec) * dt)
    return p[:-1, :-1]


def exact_h_table(spec: InhomPoissonSpec, times: np.ndarray) -> OracleTable:
    """Exact h(t, x) = P(X_T = x_end | X_t = x) for the window states.

    One matrix exponential per grid time; the chain is monotone so the
    overflow sink makes the restriction exact.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(times > spec.horizon):
        raise ValueError("grid times must lie in [0, horizon]")
    states = np.arange(spec.x0, spec.x_end + 1)
    q = _generator(spec)
    h = np.empty((times.shape[0], states.shape[0]))
    for i, t in enumerate(times):
        p = expm(q * (spec.horizon - t))
        h[i] = p[:-1, spec.x_end - spec.x0]
    return OracleTable(times=times, states=states, h_values=h)
