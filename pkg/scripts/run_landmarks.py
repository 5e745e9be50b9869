"""Two landmarks on a line, pushed to new positions by a guided Hamiltonian flow.

Compares plain importance replicates against a pCN chain on the driving
noise for the same bridge.
"""
import argparse
import math

import numpy as np

from bridgesim import core, models, sde
from bridgesim import landmarks as lmk
from bridgesim.rng import stream


def endpoint_error(weighted, qT):
    return [float(np.max(np.abs(w.path.values[-1, :2] - qT.ravel()))) for w in weighted]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=606)
    ap.add_argument("--paths", type=int, default=500)
    ap.add_argument("--rho", type=float, default=0.8, help="pCN proposal correlation")
    args = ap.parse_args()

    kernel = lmk.GaussianKernel(length_scale=1.0)
    noise = lmk.NoiseField(centers=[[0.4], [1.6]], gamma=[0.5], tau=1.0)
    q0 = np.array([[0.0], [1.0]])
    p0 = np.array([[0.3], [-0.1]])
    qT = np.array([[0.5], [1.5]])
    report = lmk.validate_noise_rank(noise, 2, 1, qT)
    print(f"noise rank check: {report.message}")

    model = models.landmarks(kernel=kernel, noise=noise, q0=q0, p0=p0, qT=qT)
    tables = sde.solve_backward_tables(model.aux, sde.refined_grid(1.0, 64))
    g = sde.refined_grid(1.0, 1000)

    weighted = sde.simulate_guided_batch(
        model.spec, tables, model.aux, g, seed=args.seed, n_paths=args.paths
    )
    errs = endpoint_error(weighted, qT)
    rep = core.importance_estimate(weighted, lambda p: float(np.max(np.abs(p.values[-1, :2] - qT.ravel()))), "self_normalized")
    print(f"importance: {args.paths} paths, mean endpoint error {np.mean(errs):.2e}, "
          f"weighted {rep.estimate:.2e} (ESS {rep.effective_sample_size:.0f})")

    # pCN: correlated refresh of the whole innovation array, accept on the
    # weight difference
    n_steps = g.size - 1
    Z = stream(args.seed, 1).standard_normal((n_steps, model.spec.noise_dim))
    run = lambda Zc: sde.simulate_guided_sde(model.spec, tables, model.aux, g, innovations=Zc)
    current = run(Z)
    accept = stream(args.seed, 0)
    accepted = 0
    chain_err = []
    for it in range(args.paths - 1):
        Zp = core.pcn_step(Z, args.rho, args.seed, index=2 + it)
        prop = run(Zp)
        if not prop.invalid:
            log_ratio = prop.log_psi - current.log_psi
            if log_ratio >= 0 or accept.random() < math.exp(log_ratio):
                current, Z = prop, Zp
                accepted += 1
        chain_err.append(float(np.max(np.abs(current.path.values[-1, :2] - qT.ravel()))))
    print(f"pcn(rho={args.rho}): acceptance {accepted / (args.paths - 1):.3f}, "
          f"mean endpoint error {np.mean(chain_err):.2e}")


if __name__ == "__main__":
    main()
