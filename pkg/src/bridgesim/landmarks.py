"""Hamiltonian landmark dynamics with spatially localized noise fields.

n landmarks in R^d carry positions q_i and momenta p_i coupled by a radial
kernel k (Gaussian times the identity):

    H(q, p) = 1/2 sum_ij p_i' p_j k(|q_i - q_j|).

J noise fields, each a Gaussian bump of width tau at a center delta_l with
amplitude vector gamma, push positions directly and momenta through the
induced co-adjoint term. The simulator integrates the Ito form, so the drift
carries the closed-form Stratonovich correction (the noise coefficients
depend on the state).

State layout everywhere: x = (q_1, ..., q_n, p_1, ..., p_n) flattened
row-major, length 2nd. The *_flat helpers are batch-aware over leading axes.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sde import LinearAuxiliarySpec

__all__ = [
    "GaussianKernel",
    "NoiseField",
    "LandmarkState",
    "hamiltonian",
    "hamiltonian_gradients",
    "noise_matrix",
    "ito_correction",
    "ito_drift",
    "hamiltonian_drift_flat",
    "noise_matrix_flat",
    "ito_drift_flat",
    "build_landmark_auxiliary",
    "NoiseRankReport",
    "validate_noise_rank",
    "state_to_csv",
    "state_from_csv",
]


@dataclass(frozen=True)
class GaussianKernel:
    """k(r) = amplitude * exp(-r^2 / (2 length_scale^2)); radial derivative
    k'(r)/r = -k(r)/length_scale^2 stays finite at r = 0."""

    length_scale: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.length_scale <= 0 or self.amplitude <= 0:
            raise ValueError("length_scale and amplitude must be positive")


@dataclass(frozen=True)
class NoiseField:
    centers: np.ndarray  # (J, d) bump locations
    gamma: np.ndarray    # (d,) amplitude per state component
    tau: float           # bump width

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if centers.ndim != 2:
            raise ValueError("centers must be a (J, d) array")
        if gamma.ndim != 1 or gamma.size != centers.shape[1]:
            raise ValueError("gamma must be a d-vector matching the centers")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_fields(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True)
class LandmarkState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape:
            raise ValueError("q and p must have the same (n, d) shape")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return int(self.q.shape[0])

    @property
    def d(self) -> int:
        return int(self.q.shape[1])

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.q.ravel(), self.p.ravel()])

    @classmethod
    def from_flat(cls, x, n: int, d: int) -> "LandmarkState":
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * n * d,):
            raise ValueError(f"flat state must have length {2 * n * d}")
        return cls(q=x[: n * d].reshape(n, d), p=x[n * d:].reshape(n, d))


def _split(X: np.ndarray, n: int, d: int):
    lead = X.shape[:-1]
    Q = X[..., : n * d].reshape(lead + (n, d))
    P = X[..., n * d:].reshape(lead + (n, d))
    return Q, P


def _gram(kernel: GaussianKernel, Q: np.ndarray) -> np.ndarray:
    diff = Q[..., :, None, :] - Q[..., None, :, :]
    r2 = np.sum(diff * diff, axis=-1)
    return kernel.amplitude * np.exp(-r2 / (2.0 * kernel.length_scale**2)), diff


def hamiltonian(kernel: GaussianKernel, state: LandmarkState) -> float:
    K, _ = _gram(kernel, state.q)
    pp = state.p @ state.p.T
    return 0.5 * float(np.sum(K * pp))


def hamiltonian_gradients(kernel: GaussianKernel, state: LandmarkState):
    """(dH/dq, dH/dp), each (n, d). Rejects coincident landmarks: a radial
    kernel's direction vector is undefined there."""
    K, diff = _gram(kernel, state.q)
    r2 = np.sum(diff * diff, axis=-1)
    off = ~np.eye(state.n, dtype=bool)
    if state.n > 1 and np.any(r2[off] == 0.0):
        raise ValueError("coincident landmark positions make the kernel gradient singular")
    pp = state.p @ state.p.T
    dq = -(1.0 / kernel.length_scale**2) * np.einsum("ij,ijd->id", K * pp, diff)
    dp = K @ state.p
    return dq, dp


def hamiltonian_drift_flat(kernel: GaussianKernel, X: np.ndarray, n: int, d: int) -> np.ndarray:
    """(dH/dp, -dH/dq) stacked flat; batch-aware."""
    Q, P = _split(np.asarray(X, dtype=float), n, d)
    K, diff = _gram(kernel, Q)
    pp = np.einsum("...id,...jd->...ij", P, P)
    dq = -(1.0 / kernel.length_scale**2) * np.einsum("...ij,...ijd->...id", K * pp, diff)
    dp = np.einsum("...ij,...jd->...id", K, P)
    lead = X.shape[:-1]
    return np.concatenate([dp.reshape(lead + (n * d,)), -dq.reshape(lead + (n * d,))], axis=-1)


def _bumps(noise: NoiseField, Q: np.ndarray):
    """U[..., i, l, :] = q_i - delta_l and Lam[..., i, l] = exp(-|U|^2/(2 tau^2))."""
    U = Q[..., :, None, :] - noise.centers
    r2 = np.sum(U * U, axis=-1)
    return U, np.exp(-r2 / (2.0 * noise.tau**2))


def noise_matrix_flat(noise: NoiseField, X: np.ndarray, n: int, d: int) -> np.ndarray:
    """Dispersion (..., 2nd, J): column l pushes q_i by gamma * Lam(q_i - delta_l)
    and p_i by (p_i . gamma) (q_i - delta_l) Lam / tau^2 (the negative
    q-gradient of <p_i, sigma_l(q_i)>)."""
    X = np.asarray(X, dtype=float)
    Q, P = _split(X, n, d)
    U, Lam = _bumps(noise, Q)
    lead = X.shape[:-1]
    J = noise.n_fields
    Sq = np.einsum("a,...il->...ial", noise.gamma, Lam)
    pg = np.einsum("...id,d->...i", P, noise.gamma)
    Sp = np.einsum("...i,...ila,...il->...ial", pg, U, Lam) / noise.tau**2
    return np.concatenate(
        [Sq.reshape(lead + (n * d, J)), Sp.reshape(lead + (n * d, J))], axis=-2
    )


def _ito_correction_flat(noise: NoiseField, X: np.ndarray, n: int, d: int) -> np.ndarray:
    """(1/2) sum_l (D sigma_l) sigma_l in closed form.

    Column l only involves landmark i's own coordinates, so the Jacobian
    contraction reduces per landmark to
        q-rows: -gamma (U_il . gamma) Lam_il^2 / (2 tau^2)   summed over l,
        p-rows: +gamma (p_i . gamma)  Lam_il^2 / (2 tau^2)   summed over l.
    """
    X = np.asarray(X, dtype=float)
    Q, P = _split(X, n, d)
    U, Lam = _bumps(noise, Q)
    lead = X.shape[:-1]
    Lam2 = Lam * Lam
    ug = np.einsum("...ila,a->...il", U, noise.gamma)
    sq = np.sum(Lam2 * ug, axis=-1)                    # (..., n)
    pg = np.einsum("...id,d->...i", P, noise.gamma)
    sp = pg * np.sum(Lam2, axis=-1)                    # (..., n)
    half = 1.0 / (2.0 * noise.tau**2)
    corr_q = -half * np.einsum("...i,a->...ia", sq, noise.gamma)
    corr_p = half * np.einsum("...i,a->...ia", sp, noise.gamma)
    return np.concatenate(
        [corr_q.reshape(lead + (n * d,)), corr_p.reshape(lead + (n * d,))], axis=-1
    )


def ito_drift_flat(kernel: GaussianKernel, noise: NoiseField, X: np.ndarray, n: int, d: int) -> np.ndarray:
    return hamiltonian_drift_flat(kernel, X, n, d) + _ito_correction_flat(noise, X, n, d)


def noise_matrix(noise: NoiseField, state: LandmarkState) -> np.ndarray:
    return noise_matrix_flat(noise, state.flatten(), state.n, state.d)


def ito_correction(noise: NoiseField, state: LandmarkState) -> np.ndarray:
    return _ito_correction_flat(noise, state.flatten(), state.n, state.d)


def ito_drift(kernel: GaussianKernel, noise: NoiseField, state: LandmarkState) -> np.ndarray:
    return ito_drift_flat(kernel, noise, state.flatten(), state.n, state.d)


def build_landmark_auxiliary(
    kernel: GaussianKernel,
    noise: NoiseField,
    qT,
    pT=None,
    C: Optional[np.ndarray] = None,
) -> LinearAuxiliarySpec:
    """Linear surrogate frozen at the target configuration.

    The position block of the drift matrix is the kernel Gram matrix at qT
    (times I_d), so the surrogate's position drift at (qT, pT) coincides with
    the Hamiltonian one; the momentum block C defaults to zero because the
    frozen noise coefficients are constants. The dispersion is the noise
    matrix at (qT, pT); pT defaults to rest.
    """
    qT = np.atleast_2d(np.asarray(qT, dtype=float))
    n, d = qT.shape
    if pT is None:
        pT = np.zeros((n, d))
    pT = np.atleast_2d(np.asarray(pT, dtype=float))
    if pT.shape != (n, d):
        raise ValueError("pT must match the shape of qT")
    nd = n * d
    if C is None:
        C = np.zeros((nd, nd))
    C = np.asarray(C, dtype=float)
    if C.shape != (nd, nd):
        raise ValueError(f"C must be ({nd}, {nd})")
    K, _ = _gram(kernel, qT)
    G = np.kron(K, np.eye(d))
    B = np.zeros((2 * nd, 2 * nd))
    B[:nd, nd:] = G
    B[nd:, nd:] = C
    sig = noise_matrix(noise, LandmarkState(q=qT, p=pT))
    L = np.concatenate([np.eye(nd), np.zeros((nd, nd))], axis=1)
    return LinearAuxiliarySpec(
        B_tilde=lambda t: B,
        beta_tilde=lambda t: np.zeros(2 * nd),
        sigma_tilde=lambda t: sig,
        L=L,
        v=qT.ravel(),
    )


@dataclass(frozen=True)
class NoiseRankReport:
    passes: bool
    n_fields: int
    required: int
    lambda_min: float
    message: str


def validate_noise_rank(noise: NoiseField, n: int, d: int, qT, pT=None) -> NoiseRankReport:
    """Check that the frozen position-noise covariance has full rank.

    Guided proposals behave erratically when that covariance is rank
    deficient, so the check requires at least n*d noise fields (J >= n d)
    and a smallest eigenvalue of sigma_q sigma_q' above 1e-10 at the target
    configuration.
    """
    qT = np.atleast_2d(np.asarray(qT, dtype=float))
    if pT is None:
        pT = np.zeros_like(qT)
    sig = noise_matrix(noise, LandmarkState(q=qT, p=np.atleast_2d(np.asarray(pT, dtype=float))))
    Sq = sig[: n * d]
    lam = float(np.min(np.linalg.eigvalsh(Sq @ Sq.T)))
    enough = noise.n_fields >= n * d
    healthy = lam > 1e-10
    if enough and healthy:
        msg = "position-noise covariance is full rank at the target"
    elif not enough:
        msg = (
            f"only J={noise.n_fields} noise fields for n*d={n * d} position "
            "coordinates; guided proposals behave erratically when J < n*d"
        )
    else:
        msg = (
            f"position-noise covariance is numerically singular at the target "
            f"(smallest eigenvalue {lam:.3e}); guided proposals behave "
            "erratically on the deficient directions"
        )
    return NoiseRankReport(
        passes=bool(enough and healthy),
        n_fields=noise.n_fields,
        required=n * d,
        lambda_min=lam,
        message=msg,
    )


def state_to_csv(state: LandmarkState) -> str:
    d = state.d
    header = ["landmark"] + [f"q{j}" for j in range(d)] + [f"p{j}" for j in range(d)]
    lines = [",".join(header)]
    for i in range(state.n):
        row = [str(i)] + [repr(float(x)) for x in state.q[i]] + [repr(float(x)) for x in state.p[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def state_from_csv(text: str) -> LandmarkState:
    rows = [line.split(",") for line in io.StringIO(text).read().strip().splitlines()]
    header = rows[0]
    if header[0] != "landmark" or (len(header) - 1) % 2 != 0:
        raise ValueError("expected columns landmark,q0..,p0..")
    d = (len(header) - 1) // 2
    q = np.array([[float(c) for c in r[1 : 1 + d]] for r in rows[1:]])
    p = np.array([[float(c) for c in r[1 + d :]] for r in rows[1:]])
    return LandmarkState(q=q, p=p)
