"""Guided bridges for diffusions conditioned on a linear endpoint functional.

The target dX = b(t,X)dt + sigma(t,X)dW is conditioned on L X_T = v. The
guiding function htilde(t,x) is the density of the endpoint functional under
a linear surrogate dX~ = (B~(t)X~ + beta~(t))dt + sigma~(t)dW, and is fully
described by three time tables solved backward from the horizon:

    L(t)      observation rows pulled back through the linear flow,
    mu(t)     surrogate drift accumulated through L(t),
    M(t)^-1   = int_t^T L(s) a~(s) L(s)' ds   with a~ = sigma~ sigma~'.

M(t)^-1 collapses to zero at the horizon, so M(t) is never materialized:
every product M zeta is an SPD solve against M(t)^-1, and log|M| is read off
the same Cholesky factor. Simulation is Euler-Maruyama on a grid refined
quadratically toward the horizon, where the guiding drift grows like
(T-t)^-1. Each path carries log_psi = sum_i G(t_i, X_i) dt_i, the
log likelihood ratio between the conditioned and guided laws up to the
constant htilde(0,x0)/h(0,x0).

Batch convention: drift and dispersion callables take states of shape
(..., d) and return (..., d) and (..., d, d') respectively, so one call
serves a whole batch of paths per time step.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .paths import GridPath, WeightedPath
from .rng import stream

__all__ = [
    "ConditioningError",
    "SdeSpec",
    "LinearAuxiliarySpec",
    "BackwardTables",
    "DeltaScaling",
    "identity_delta",
    "inverse_time_delta",
    "refined_grid",
    "solve_backward_tables",
    "htilde_quantities",
    "guided_drift",
    "log_psi_integrand_G",
    "simulate_guided_sde",
    "simulate_guided_batch",
    "AssumptionReport",
    "assumption_diagnostics",
    "scaled_noise_mismatch",
    "LipschitzReport",
    "lipschitz_sufficiency_check",
]


class ConditioningError(RuntimeError):
    """M(t)^-1 is numerically singular at a time where it must be SPD."""


@dataclass(frozen=True)
class SdeSpec:
    """Diffusion to be bridged: dX = drift dt + sigma dW from x0."""

    dim: int
    noise_dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[float, np.ndarray], np.ndarray]
    x0: np.ndarray

    def __post_init__(self):
        if self.dim < 1 or self.noise_dim < 1:
            raise ValueError("dim and noise_dim must be positive")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.dim,):
            raise ValueError(f"x0 must have shape ({self.dim},)")
        if not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class LinearAuxiliarySpec:
    """Linear surrogate dX~ = (B~(t)X~ + beta~(t))dt + sigma~(t)dW and the
    endpoint functional L X_T = v it is solved against.

    B_tilde, beta_tilde, sigma_tilde are callables of time returning (d,d),
    (d,) and (d,d') arrays; L is a full-row-rank (m,d) matrix, v an m-vector.
    """

    B_tilde: Callable[[float], np.ndarray]
    beta_tilde: Callable[[float], np.ndarray]
    sigma_tilde: Callable[[float], np.ndarray]
    L: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if L.ndim != 2:
            raise ValueError("L must be a 2-d matrix")
        m, d = L.shape
        if m > d:
            raise ValueError("L cannot have more rows than columns")
        if v.shape != (m,):
            raise ValueError(f"v must have shape ({m},)")
        if np.linalg.matrix_rank(L) != m:
            raise ValueError("L must have full row rank")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "v", v)

    @property
    def m(self) -> int:
        return self.L.shape[0]

    @property
    def d(self) -> int:
        return self.L.shape[1]

    def a_tilde(self, t: float) -> np.ndarray:
        st = np.asarray(self.sigma_tilde(t), dtype=float)
        return st @ st.T


@dataclass(frozen=True)
class DeltaScaling:
    """Diagonal time rescaling of the observation rows; `diag(t)` returns the
    positive diagonal entries, required nondecreasing in t."""

    diag: Callable[[float], np.ndarray]


def identity_delta(m: int) -> DeltaScaling:
    return DeltaScaling(diag=lambda t: np.ones(m))


def inverse_time_delta(m: int, horizon: float) -> DeltaScaling:
    """Entries 1/(T-t): the scaling for components one integration away
    from the noise."""
    return DeltaScaling(diag=lambda t: np.full(m, 1.0 / (horizon - t)))


def refined_grid(horizon: float, n_steps: int) -> np.ndarray:
    """Time points T(1 - (1 - i/N)^2): step sizes shrink linearly to T/N^2
    at the horizon, where the guiding drift is stiffest."""
    if n_steps < 2:
        raise ValueError("need at least two steps")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    u = np.arange(n_steps + 1, dtype=float) / n_steps
    g = horizon * (1.0 - (1.0 - u) ** 2)
    g[0] = 0.0
    g[-1] = horizon
    return g


@dataclass(frozen=True)
class BackwardTables:
    """Backward-solved guiding tables on a time grid ending at the horizon.

    Between nodes the tables interpolate linearly; at the last node the
    terminal values (L, 0, 0) hold exactly.
    """

    times: np.ndarray     # (G,) increasing, last entry is the horizon
    L_of_t: np.ndarray    # (G, m, d)
    mu_of_t: np.ndarray   # (G, m)
    Minv_of_t: np.ndarray  # (G, m, m), SPD before the horizon, zero at it

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def eps_table(self) -> float:
        """Width of the last grid cell; queries inside (T - eps, T) rest on
        interpolation toward the vanishing terminal value."""
        return float(self.times[-1] - self.times[-2])

    def lookup(self, t: float):
        """Linearly interpolated (L(t), mu(t), M(t)^-1)."""
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t={t!r} outside the table range")
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), times.size - 2)
        w = (t - times[j]) / (times[j + 1] - times[j])
        w = min(max(w, 0.0), 1.0)
        L = (1.0 - w) * self.L_of_t[j] + w * self.L_of_t[j + 1]
        mu = (1.0 - w) * self.mu_of_t[j] + w * self.mu_of_t[j + 1]
        Minv = (1.0 - w) * self.Minv_of_t[j] + w * self.Minv_of_t[j + 1]
        return L, mu, Minv


def solve_backward_tables(aux: LinearAuxiliarySpec, grid) -> BackwardTables:
    """Integrate the table ODEs backward from the horizon with classical RK4.

    dL/dt = -L B~(t), dmu/dt = -L(t) beta~(t), dM^-1/dt = -L a~ L', from
    (L, 0, 0) at t = T. The terminal values are imposed exactly after the
    sweep and re-checked. The grid must end at the horizon and be refined
    toward it (last cell at most 1e-3 T); every interior node is verified
    SPD so later Cholesky solves cannot silently fail.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("grid must be a 1-d array with at least two nodes")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if g[0] < 0:
        raise ValueError("grid must start at or after time zero")
    horizon = float(g[-1])
    if g[-1] - g[-2] > 1e-3 * horizon * (1 + 1e-9):
        raise ValueError("last grid cell exceeds 1e-3 of the horizon; refine toward it")
    m, d = aux.L.shape
    n = g.size
    Ls = np.empty((n, m, d))
    mus = np.empty((n, m))
    Minvs = np.empty((n, m, m))
    Ls[-1] = aux.L
    mus[-1] = 0.0
    Minvs[-1] = 0.0

    def rhs(t: float, Lr: np.ndarray):
        B = np.asarray(aux.B_tilde(t), dtype=float)
        be = np.asarray(aux.beta_tilde(t), dtype=float)
        at = aux.a_tilde(t)
        return -Lr @ B, -Lr @ be, -Lr @ at @ Lr.T

    L_c = np.array(aux.L, dtype=float)
    mu_c = np.zeros(m)
    Mi_c = np.zeros((m, m))
    for k in range(n - 1, 0, -1):
        t = float(g[k])
        h = float(g[k - 1] - g[k])  # negative: we march toward time zero
        k1L, k1m, k1M = rhs(t, L_c)
        k2L, k2m, k2M = rhs(t + 0.5 * h, L_c + 0.5 * h * k1L)
        k3L, k3m, k3M = rhs(t + 0.5 * h, L_c + 0.5 * h * k2L)
        k4L, k4m, k4M = rhs(t + h, L_c + h * k3L)
        L_c = L_c + (h / 6.0) * (k1L + 2.0 * k2L + 2.0 * k3L + k4L)
        mu_c = mu_c + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        Mi_c = Mi_c + (h / 6.0) * (k1M + 2.0 * k2M + 2.0 * k3M + k4M)
        Mi_c = 0.5 * (Mi_c + Mi_c.T)
        Ls[k - 1] = L_c
        mus[k - 1] = mu_c
        Minvs[k - 1] = Mi_c
    # terminal conditions are definitional: impose, then re-check
    Ls[-1] = aux.L
    mus[-1] = 0.0
    Minvs[-1] = 0.0
    if not (np.array_equal(Ls[-1], aux.L) and np.all(mus[-1] == 0.0) and np.all(Minvs[-1] == 0.0)):
        raise AssertionError("terminal table values were not stored exactly")
    eigs = np.linalg.eigvalsh(Minvs[:-1])
    if np.any(eigs[:, 0] <= 0.0):
        bad = int(np.argmin(eigs[:, 0]))
        raise ConditioningError(
            f"M^-1 not positive definite at t={g[bad]!r} "
            f"(horizon {horizon!r}): smallest eigenvalue {eigs[bad, 0]:.3e}"
        )
    return BackwardTables(times=g, L_of_t=Ls, mu_of_t=mus, Minv_of_t=Minvs)


def _spd_factor(Minv: np.ndarray, t: float, horizon: float):
    try:
        return cho_factor(Minv, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        lam = float(np.min(np.linalg.eigvalsh(Minv)))
        raise ConditioningError(
            f"M^-1 not positive definite at t={t!r} (horizon {horizon!r}): "
            f"smallest eigenvalue {lam:.3e}"
        ) from None


def _guide_cache(tables: BackwardTables, aux: LinearAuxiliarySpec, t: float):
    """Per-time quantities shared across a batch: tables at t, the Cholesky
    factor of M(t)^-1, K = L'ML and log|M^-1|."""
    L_t, mu_t, Minv_t = tables.lookup(t)
    fac = _spd_factor(Minv_t, t, tables.horizon)
    ML = cho_solve(fac, L_t, check_finite=False)   # rows of M L(t)
    K = L_t.T @ ML
    logdet_Minv = 2.0 * float(np.sum(np.log(np.diag(fac[0]))))
    return L_t, mu_t, fac, K, logdet_Minv


def _pull_batch(aux: LinearAuxiliarySpec, cache, X: np.ndarray):
    """zeta, M zeta, r~ and H for a batch of states X (n, d)."""
    L_t, mu_t, fac = cache[0], cache[1], cache[2]
    zeta = aux.v - mu_t - X @ L_t.T               # (n, m)
    Y = cho_solve(fac, zeta.T, check_finite=False).T  # (n, m) rows = M zeta
    r = Y @ L_t                                    # (n, d)
    H = 0.5 * np.einsum("nm,nm->n", zeta, Y)
    return zeta, Y, r, H


def htilde_quantities(tables: BackwardTables, aux: LinearAuxiliarySpec, t: float, x):
    """(log htilde, r~, H, zeta) at one space-time point, t before the horizon.

    zeta = v - mu(t) - L(t)x, H = zeta'M zeta / 2, log htilde = log eta - H
    with eta(t) = (2 pi)^(-m/2) |M(t)|^(1/2), and r~ = grad_x log htilde =
    L(t)' M(t) zeta.
    """
    if t >= tables.horizon:
        raise ValueError("htilde quantities are defined only before the horizon")
    x = np.asarray(x, dtype=float)
    cache = _guide_cache(tables, aux, t)
    zeta, _, r, H = _pull_batch(aux, cache, x[None, :])
    log_eta = -0.5 * aux.m * math.log(2.0 * math.pi) - 0.5 * cache[4]
    log_htilde = log_eta - float(H[0])
    return log_htilde, r[0], float(H[0]), zeta[0]


def guided_drift(spec: SdeSpec, tables: BackwardTables, aux: LinearAuxiliarySpec, t: float, x) -> np.ndarray:
    """b(t,x) + a(t,x) r~(t,x) with a = sigma sigma'."""
    x = np.asarray(x, dtype=float)
    _, r, _, _ = htilde_quantities(tables, aux, t, x)
    b = np.asarray(spec.drift(t, x), dtype=float)
    s = np.asarray(spec.sigma(t, x), dtype=float)
    return b + s @ (s.T @ r)


def _G_batch(spec: SdeSpec, aux: LinearAuxiliarySpec, cache, t: float, X: np.ndarray, r: np.ndarray):
    """Weight integrand G = (b - b~)'r~ - tr{(a - a~)(L'ML - r~ r~')}/2 for a
    batch of states, reusing the per-time cache."""
    K = cache[3]
    b = np.asarray(spec.drift(t, X), dtype=float)
    s = np.asarray(spec.sigma(t, X), dtype=float)
    Bt = np.asarray(aux.B_tilde(t), dtype=float)
    bet = np.asarray(aux.beta_tilde(t), dtype=float)
    at = aux.a_tilde(t)
    btil = X @ Bt.T + bet
    sr = np.einsum("ndk,nd->nk", s, r)             # sigma' r
    r_a_r = np.einsum("nk,nk->n", sr, sr)          # r' a r
    r_at_r = np.einsum("ni,ij,nj->n", r, at, r)    # r' a~ r
    tr_aK = np.einsum("nik,njk,ij->n", s, s, K)    # tr(a L'ML)
    tr_atK = float(np.sum(at * K))                 # tr(a~ L'ML)
    drift_term = np.einsum("nd,nd->n", b - btil, r)
    return drift_term - 0.5 * (tr_aK - tr_atK - r_a_r + r_at_r)


def log_psi_integrand_G(spec: SdeSpec, tables: BackwardTables, aux: LinearAuxiliarySpec, t: float, x) -> float:
    if t >= tables.horizon:
        raise ValueError("G is defined only before the horizon")
    x = np.asarray(x, dtype=float)
    cache = _guide_cache(tables, aux, t)
    _, _, r, _ = _pull_batch(aux, cache, x[None, :])
    return float(_G_batch(spec, aux, cache, t, x[None, :], r)[0])


def _validate_sim_grid(g: np.ndarray, tables: BackwardTables) -> None:
    if g.ndim != 1 or g.size < 2:
        raise ValueError("simulation grid must be a 1-d array with at least two nodes")
    if np.any(np.diff(g) <= 0):
        raise ValueError("simulation grid must be strictly increasing")
    if g[0] != 0.0:
        raise ValueError("simulation grid must start at time zero")
    horizon = float(g[-1])
    if abs(horizon - tables.horizon) > 1e-12 * max(1.0, horizon):
        raise ValueError("simulation grid and tables disagree on the horizon")
    if g[-1] - g[-2] > 1e-4 * horizon * (1 + 1e-9):
        raise ValueError("last simulation step exceeds 1e-4 of the horizon; refine toward it")


def _run_batch(
    spec: SdeSpec,
    tables: BackwardTables,
    aux: LinearAuxiliarySpec,
    g: np.ndarray,
    Z: np.ndarray,
    endpoint_tol: float,
):
    """Euler-Maruyama over a (n_batch, n_steps, d') innovation block.

    Returns per-path values, log weights, running sup of the blow-up
    diagnostic V = H / log(1/(T-t)) over the window T-t <= min(1/2, T/2),
    endpoint hits and validity flags. A path whose state leaves the floats
    is frozen at its last finite state, flagged invalid, and excluded from
    further weight accumulation.
    """
    n_batch, n_steps, _ = Z.shape
    horizon = float(g[-1])
    X = np.broadcast_to(spec.x0, (n_batch, spec.dim)).copy()
    vals = np.empty((n_batch, n_steps + 1, spec.dim))
    vals[:, 0] = X
    log_psi = np.zeros(n_batch)
    sup_v = np.zeros(n_batch)
    alive = np.ones(n_batch, dtype=bool)
    first_blow = None  # (t, norm) of the first divergence, for the warning
    v_window = min(0.5, horizon / 2.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(n_steps):
            t = float(g[i])
            dt = float(g[i + 1] - g[i])
            cache = _guide_cache(tables, aux, t)
            _, _, r, H = _pull_batch(aux, cache, X)
            rem = horizon - t
            if rem <= v_window:
                V = H / math.log(1.0 / rem)
                sup_v = np.where(alive, np.maximum(sup_v, V), sup_v)
            G = _G_batch(spec, aux, cache, t, X, r)
            log_psi = np.where(alive, log_psi + G * dt, log_psi)
            b = np.asarray(spec.drift(t, X), dtype=float)
            s = np.asarray(spec.sigma(t, X), dtype=float)
            sr = np.einsum("ndk,nd->nk", s, r)
            drift = b + np.einsum("ndk,nk->nd", s, sr)
            Xn = X + drift * dt + np.einsum("ndk,nk->nd", s, Z[:, i]) * math.sqrt(dt)
            finite = np.isfinite(Xn).all(axis=1)
            newly_dead = alive & ~finite
            if np.any(newly_dead) and first_blow is None:
                j = int(np.flatnonzero(newly_dead)[0])
                # X[j] is the last finite state: it has not been overwritten yet
                first_blow = (float(g[i + 1]), float(np.max(np.abs(X[j]))))
            X = np.where((alive & finite)[:, None], Xn, X)
            alive &= finite
            vals[:, i + 1] = X
    if first_blow is not None:
        n_dead = int(np.sum(~alive))
        warnings.warn(
            f"{n_dead} path(s) diverged; first at t={first_blow[0]:.6g}, |x|~{first_blow[1]:.3e}",
            RuntimeWarning,
            stacklevel=3,
        )
    gap = np.linalg.norm(X @ aux.L.T - aux.v, axis=1)
    hit = (gap <= endpoint_tol) & alive
    log_psi = np.where(alive, log_psi, np.nan)
    sup_v = np.where(alive, sup_v, np.inf)
    return vals, log_psi, sup_v, hit, alive


def simulate_guided_sde(
    spec: SdeSpec,
    tables: BackwardTables,
    aux: LinearAuxiliarySpec,
    grid,
    seed: Optional[int] = None,
    innovations: Optional[np.ndarray] = None,
    index: int = 0,
    endpoint_tol: float = 1e-2,
) -> WeightedPath:
    """One guided path on `grid`, from fresh noise or replayed innovations.

    The drift, dispersion and weight integrand are all evaluated at the left
    node of each step; the last evaluation happens one node before the
    horizon and the endpoint is read off as simulated (no snapping to v).
    Passing `innovations` (shape (n_steps, d')) re-drives the deterministic
    path map, which is what correlated-proposal samplers need.
    """
    g = np.asarray(grid, dtype=float)
    _validate_sim_grid(g, tables)
    n_steps = g.size - 1
    if innovations is None:
        if seed is None:
            raise ValueError("need a seed when innovations are not supplied")
        Z = stream(seed, index).standard_normal((n_steps, spec.noise_dim))
        label: Optional[int] = seed if index == 0 else index
    else:
        Z = np.asarray(innovations, dtype=float)
        if Z.shape != (n_steps, spec.noise_dim):
            raise ValueError(f"innovations must have shape ({n_steps}, {spec.noise_dim})")
        label = None
    vals, log_psi, sup_v, hit, alive = _run_batch(spec, tables, aux, g, Z[None], endpoint_tol)
    return WeightedPath(
        path=GridPath(times=g, values=vals[0], innovations=Z),
        log_psi=float(log_psi[0]),
        sup_v=float(sup_v[0]),
        endpoint_hit=bool(hit[0]),
        seed=label,
        invalid=not bool(alive[0]),
    )


def simulate_guided_batch(
    spec: SdeSpec,
    tables: BackwardTables,
    aux: LinearAuxiliarySpec,
    grid,
    seed: int,
    n_paths: int,
    endpoint_tol: float = 1e-2,
    start_index: int = 0,
) -> list:
    """n_paths guided paths; path i is driven by stream(seed, start_index+i),
    so the batch is bit-identical to n_paths single simulations and invariant
    to batch splitting. The stored `seed` on each path is its stream index."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    g = np.asarray(grid, dtype=float)
    _validate_sim_grid(g, tables)
    n_steps = g.size - 1
    Z = np.empty((n_paths, n_steps, spec.noise_dim))
    for i in range(n_paths):
        Z[i] = stream(seed, start_index + i).standard_normal((n_steps, spec.noise_dim))
    vals, log_psi, sup_v, hit, alive = _run_batch(spec, tables, aux, g, Z, endpoint_tol)
    out = []
    for i in range(n_paths):
        out.append(
            WeightedPath(
                path=GridPath(times=g, values=vals[i], innovations=Z[i]),
                log_psi=float(log_psi[i]),
                sup_v=float(sup_v[i]),
                endpoint_hit=bool(hit[i]),
                seed=start_index + i,
                invalid=not bool(alive[i]),
            )
        )
    return out


# -- hypothesis diagnostics ----------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    """Running extrema, along one path, of the scaled quantities whose
    boundedness the guiding theory rests on.

    scaled_eig_* track (T-t) times the extreme eigenvalues of
    M_Delta = Delta^-1 M Delta^-1 (bounded above and away from zero when the
    scaling matches the model); drift_gap_max tracks |L_Delta (b~ - b)|;
    noise_trace_max tracks tr(L_Delta a L_Delta'); mismatch_ratio_max tracks
    ||L_Delta (a~ - a) L_Delta'|| / max(|zeta_Delta|, (T-t)^alpha). Empirical
    evidence only, never a proof.
    """

    scaled_eig_min_floor: float
    scaled_eig_min_max: float
    scaled_eig_max_max: float
    drift_gap_max: float
    noise_trace_max: float
    mismatch_ratio_max: float
    alpha: float
    n_points: int


def scaled_noise_mismatch(
    spec: SdeSpec,
    tables: BackwardTables,
    aux: LinearAuxiliarySpec,
    delta: DeltaScaling,
    t: float,
    x,
) -> np.ndarray:
    """L_Delta (a~(t) - a(t,x)) L_Delta' at one point (the matrix whose norm
    diagnostic (d) bounds)."""
    x = np.asarray(x, dtype=float)
    L_t, _, _ = tables.lookup(t)
    dm = np.asarray(delta.diag(t), dtype=float)
    Ld = dm[:, None] * L_t
    s = np.asarray(spec.sigma(t, x), dtype=float)
    a = s @ s.T
    return Ld @ (aux.a_tilde(t) - a) @ Ld.T


def assumption_diagnostics(
    spec: SdeSpec,
    tables: BackwardTables,
    aux: LinearAuxiliarySpec,
    delta: DeltaScaling,
    path: GridPath,
    alpha: float = 1.0,
) -> AssumptionReport:
    """Evaluate the boundedness diagnostics along a simulated path's nodes
    (the horizon node excluded)."""
    times = np.asarray(path.times, dtype=float)
    values = np.asarray(path.values, dtype=float)
    horizon = tables.horizon
    eig_min_floor = math.inf
    eig_min_max = -math.inf
    eig_max_max = -math.inf
    drift_gap = -math.inf
    noise_trace = -math.inf
    ratio = -math.inf
    n_pts = 0
    for t, x in zip(times, values):
        if t >= horizon:
            continue
        n_pts += 1
        t = float(t)
        L_t, mu_t, Minv_t = tables.lookup(t)
        dm = np.asarray(delta.diag(t), dtype=float)
        rem = horizon - t
        # eigenvalues of M_Delta from its inverse Delta M^-1 Delta
        eig_inv = np.linalg.eigvalsh(Minv_t * np.outer(dm, dm))
        lam_min = 1.0 / float(eig_inv[-1])
        lam_max = 1.0 / float(eig_inv[0])
        eig_min_floor = min(eig_min_floor, rem * lam_min)
        eig_min_max = max(eig_min_max, rem * lam_min)
        eig_max_max = max(eig_max_max, rem * lam_max)
        Ld = dm[:, None] * L_t
        b = np.asarray(spec.drift(t, x), dtype=float)
        btil = np.asarray(aux.B_tilde(t), dtype=float) @ x + np.asarray(aux.beta_tilde(t), dtype=float)
        drift_gap = max(drift_gap, float(np.linalg.norm(Ld @ (btil - b))))
        s = np.asarray(spec.sigma(t, x), dtype=float)
        Bs = Ld @ s
        noise_trace = max(noise_trace, float(np.sum(Bs * Bs)))
        mism = Ld @ (aux.a_tilde(t) - s @ s.T) @ Ld.T
        zeta = aux.v - mu_t - L_t @ x
        denom = max(float(np.linalg.norm(dm * zeta)), rem**alpha)
        ratio = max(ratio, float(np.linalg.norm(mism, 2)) / denom)
    if n_pts == 0:
        raise ValueError("path has no nodes before the horizon")
    return AssumptionReport(
        scaled_eig_min_floor=eig_min_floor,
        scaled_eig_min_max=eig_min_max,
        scaled_eig_max_max=eig_max_max,
        drift_gap_max=drift_gap,
        noise_trace_max=noise_trace,
        mismatch_ratio_max=ratio,
        alpha=alpha,
        n_points=n_pts,
    )


@dataclass(frozen=True)
class LipschitzReport:
    time_lipschitz: float
    space_lipschitz: float
    limit_gap: float
    limits_agree: bool


def lipschitz_sufficiency_check(
    aux: LinearAuxiliarySpec,
    tables: BackwardTables,
    a_bar: Callable[[float, np.ndarray], np.ndarray],
    delta: DeltaScaling,
    t_grid,
    y_samples,
    spec: Optional[SdeSpec] = None,
    x_samples=None,
    tol: float = 1e-6,
) -> LipschitzReport:
    """Finite-difference Lipschitz evidence for the scaled noise maps.

    a_bar(t, y) must equal a(t, x) whenever y = Lx (asserted on x_samples
    when a spec is supplied). Estimates the Lipschitz constant of
    t -> L_Delta(t) a~(t) L_Delta(t)' over t_grid and of
    y -> L_Delta(t) a_bar(t, y) L_Delta(t)' over y_samples (max over t_grid),
    and compares the two maps at the last grid time, evaluating a_bar at the
    endpoint v: both should approach the same terminal matrix.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-d array")
    if ts[-1] >= tables.horizon:
        raise ValueError("t_grid must stay before the horizon")
    ys = [np.atleast_1d(np.asarray(y, dtype=float)) for y in y_samples]
    if spec is not None and x_samples is not None:
        for x in x_samples:
            x = np.asarray(x, dtype=float)
            for t in ts:
                ax = np.asarray(spec.sigma(float(t), x), dtype=float)
                ax = ax @ ax.T
                ay = np.asarray(a_bar(float(t), aux.L @ x), dtype=float)
                if not np.allclose(ax, ay, rtol=1e-9, atol=1e-10):
                    raise ValueError(
                        "a_bar(t, Lx) does not reproduce a(t, x) on a sample: contract violation"
                    )

    def scaled(t: float, mat: np.ndarray) -> np.ndarray:
        L_t, _, _ = tables.lookup(t)
        dm = np.asarray(delta.diag(t), dtype=float)
        Ld = dm[:, None] * L_t
        return Ld @ mat @ Ld.T

    f_vals = [scaled(float(t), aux.a_tilde(float(t))) for t in ts]
    time_lip = 0.0
    for k in range(ts.size - 1):
        dt = float(ts[k + 1] - ts[k])
        time_lip = max(time_lip, float(np.linalg.norm(f_vals[k + 1] - f_vals[k], 2)) / dt)
    space_lip = 0.0
    for t in ts:
        t = float(t)
        mats = [scaled(t, np.asarray(a_bar(t, y), dtype=float)) for y in ys]
        for i in range(len(ys)):
            for j in range(i + 1, len(ys)):
                dy = float(np.linalg.norm(ys[i] - ys[j]))
                if dy == 0.0:
                    continue
                space_lip = max(space_lip, float(np.linalg.norm(mats[i] - mats[j], 2)) / dy)
    t_last = float(ts[-1])
    g1 = scaled(t_last, aux.a_tilde(t_last))
    g2 = scaled(t_last, np.asarray(a_bar(t_last, aux.v), dtype=float))
    gap = float(np.linalg.norm(g1 - g2, 2))
    return LipschitzReport(
        time_lipschitz=time_lip,
        space_lipschitz=space_lip,
        limit_gap=gap,
        limits_agree=bool(gap <= tol),
    )
