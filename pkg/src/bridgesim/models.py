"""Built-in bridge models: target SDE, linear surrogate and time scaling
bundled per model name (brownian, ou, integrated_diffusion, landmarks).

Every drift/dispersion callable here is batch-aware: states of shape
(..., d) map to drifts of shape (..., d) and dispersions of shape
(..., d, d'), so the simulation engine steps whole replicate batches at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import landmarks as lmk
from .sde import (
    DeltaScaling,
    LinearAuxiliarySpec,
    SdeSpec,
    identity_delta,
    inverse_time_delta,
)

__all__ = ["GuidedModel", "brownian", "ou", "integrated_diffusion", "landmarks"]


@dataclass(frozen=True)
class GuidedModel:
    """A bridgeable model: nonlinear target, linear surrogate, time scaling."""

    spec: SdeSpec
    aux: LinearAuxiliarySpec
    delta: DeltaScaling


def _constant_dispersion(mat: np.ndarray):
    mat = np.asarray(mat, dtype=float)

    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(mat, x.shape[:-1] + mat.shape)

    return sigma


def brownian(x0, v, horizon: float, sigma: float = 1.0) -> GuidedModel:
    """Brownian motion with dispersion sigma*I bridged to X_T = v; the
    surrogate equals the target, so every path carries log_psi = 0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = x0.size
    if v.size != d:
        raise ValueError("v must match the dimension of x0")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    disp = sigma * np.eye(d)
    spec = SdeSpec(
        dim=d,
        noise_dim=d,
        drift=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        sigma=_constant_dispersion(disp),
        x0=x0,
    )
    aux = LinearAuxiliarySpec(
        B_tilde=lambda t: np.zeros((d, d)),
        beta_tilde=lambda t: np.zeros(d),
        sigma_tilde=lambda t: disp,
        L=np.eye(d),
        v=v,
    )
    return GuidedModel(spec=spec, aux=aux, delta=identity_delta(d))


def ou(x0, v, horizon: float, rate: float, level=0.0, sigma: float = 1.0) -> GuidedModel:
    """Mean-reverting linear SDE dX = rate (level - X) dt + sigma dW bridged
    to X_T = v. The drift is already linear, so the surrogate reproduces the
    target exactly and the guided process is the exact bridge (log_psi = 0).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = x0.size
    if v.size != d:
        raise ValueError("v must match the dimension of x0")
    if sigma <= 0 or horizon <= 0:
        raise ValueError("sigma and horizon must be positive")
    level = np.broadcast_to(np.asarray(level, dtype=float), (d,)).copy()
    disp = sigma * np.eye(d)

    def drift(t, x):
        return rate * (level - np.asarray(x, dtype=float))

    aux = LinearAuxiliarySpec(
        B_tilde=lambda t: -rate * np.eye(d),
        beta_tilde=lambda t: rate * level,
        sigma_tilde=lambda t: disp,
        L=np.eye(d),
        v=v,
    )
    spec = SdeSpec(dim=d, noise_dim=d, drift=drift, sigma=_constant_dispersion(disp), x0=x0)
    return GuidedModel(spec=spec, aux=aux, delta=identity_delta(d))


def integrated_diffusion(
    x0,
    v: float,
    horizon: float,
    accel: float = 0.0,
    gamma_base: float = 1.0,
    gamma_amp: float = 0.5,
) -> GuidedModel:
    """Position-velocity system where only the velocity is driven by noise:

        dX1 = X2 dt,    dX2 = accel dt + gamma(X1) dW,

    bridged to the position X1(T) = v, with gamma(u) = gamma_base
    + gamma_amp*sin(u). The surrogate freezes the dispersion at the target
    position, which is the only state information the endpoint pins down;
    position rows are scaled by 1/(T-t) since they sit one integration away
    from the noise.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,):
        raise ValueError("x0 must be a (position, velocity) pair")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if gamma_base <= abs(gamma_amp):
        raise ValueError("need gamma_base > |gamma_amp| so the noise never vanishes")
    v_pos = float(np.atleast_1d(np.asarray(v, dtype=float))[0])

    def gamma(u):
        return gamma_base + gamma_amp * np.sin(u)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = x[..., 1]
        out[..., 1] = accel
        return out

    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 1, 0] = gamma(x[..., 0])
        return out

    gamma_end = float(gamma(v_pos))
    sig_tilde = np.array([[0.0], [gamma_end]])
    aux = LinearAuxiliarySpec(
        B_tilde=lambda t: np.array([[0.0, 1.0], [0.0, 0.0]]),
        beta_tilde=lambda t: np.array([0.0, accel]),
        sigma_tilde=lambda t: sig_tilde,
        L=np.array([[1.0, 0.0]]),
        v=np.array([v_pos]),
    )
    spec = SdeSpec(dim=2, noise_dim=1, drift=drift, sigma=sigma, x0=x0)
    return GuidedModel(spec=spec, aux=aux, delta=inverse_time_delta(1, horizon))


def landmarks(
    kernel: "lmk.GaussianKernel",
    noise: "lmk.NoiseField",
    q0,
    p0,
    qT,
    pT=None,
    C: Optional[np.ndarray] = None,
) -> GuidedModel:
    """Stochastic landmark flow bridged to the target positions qT.

    The state stacks positions then momenta; the drift is the Hamiltonian
    vector field plus the closed-form correction that converts the
    Stratonovich noise coupling to the Ito form the simulator integrates.
    The surrogate freezes the kernel and the noise fields at (qT, pT).
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if q0.shape != p0.shape or q0.ndim != 2:
        raise ValueError("q0 and p0 must be matching (n, d) arrays")
    n, d = q0.shape
    state_dim = 2 * n * d

    def drift(t, x):
        return lmk.ito_drift_flat(kernel, noise, np.asarray(x, dtype=float), n, d)

    def sigma(t, x):
        return lmk.noise_matrix_flat(noise, np.asarray(x, dtype=float), n, d)

    spec = SdeSpec(
        dim=state_dim,
        noise_dim=int(noise.centers.shape[0]),
        drift=drift,
        sigma=sigma,
        x0=np.concatenate([q0.ravel(), p0.ravel()]),
    )
    aux = lmk.build_landmark_auxiliary(kernel, noise, qT, pT=pT, C=C)
    return GuidedModel(spec=spec, aux=aux, delta=identity_delta(n * d))
