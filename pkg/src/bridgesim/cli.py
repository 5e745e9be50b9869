"""Configuration-driven experiment runner.

One JSON config file describes one experiment: a backend block (poisson,
delaunay, sde or landmarks), a sampler block (importance replicates, an
independence MH chain, or a pCN chain on the driving noise), a mandatory
seed and an output directory. `run` writes four artifacts into the output
directory:

    manifest.json   effective config echo, library versions, the seed
    paths/*.csv     the first few replicate paths (capped, see paths_to_save)
    weights.csv     one row per replicate: id, log_psi, sup_V, endpoint_hit
    summary.json    estimates with standard errors, ESS, hit rate,
                    diagnostic extrema; exact-h0 normalization when a
                    matrix-exponential oracle applies

`validate` checks a config without simulating anything; `calibrate-atilde`
wraps the quadratic-variation diffusivity estimate for the Delaunay walk.

Reruns with the same config and seed are bit identical: every random number
comes from counter-keyed streams, replicate i always uses stream index i,
and chain machinery reserves stream index 0 (which is why replicate
proposals inside chains count from 1).

Exit codes: 0 success, 2 malformed config, 3 unknown backend, 4 unwritable
output.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, core, delaunay, poisson, sde
from . import landmarks as lmk
from . import models
from . import triangulation as tri
from .paths import WeightedPath, fmt, path_to_csv
from .rng import stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_OUTPUT = 4

BACKENDS = ("poisson", "delaunay", "sde", "landmarks")
SAMPLERS = ("importance", "mh_independence", "pcn")

_ORACLE_VERTEX_CAP = 500


class ConfigError(ValueError):
    """Config file missing, unparseable, or missing/invalid keys."""


class BackendError(ValueError):
    """Backend name not one of the supported four."""


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return block[key]


def _int_key(block: dict, key: str, where: str) -> int:
    v = _require(block, key, where)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    return v


def _effective(cfg: dict, args) -> dict:
    """Apply command-line overrides; returns the config the run actually uses."""
    out = json.loads(json.dumps(cfg))  # deep copy, JSON types only
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out"] = args.out
    if args.paths is not None:
        sampler = out.setdefault("sampler", {})
        if sampler.get("kind", "importance") == "importance":
            sampler["n_paths"] = args.paths
        else:
            sampler["n_iter"] = args.paths
    return out


def _check_common(cfg: dict) -> tuple[str, int, dict]:
    backend = _require(cfg, "backend", "config")
    if backend not in BACKENDS:
        raise BackendError(f"unknown backend {backend!r}; expected one of {', '.join(BACKENDS)}")
    seed = _int_key(cfg, "seed", "config")
    sampler = cfg.get("sampler", {"kind": "importance", "n_paths": 1000})
    kind = sampler.get("kind", "importance")
    if kind not in SAMPLERS:
        raise ConfigError(f"unknown sampler kind {kind!r}")
    if kind == "pcn" and backend not in ("sde", "landmarks"):
        raise ConfigError("pcn sampling needs a driving-noise backend (sde or landmarks)")
    if backend not in cfg:
        raise ConfigError(f"missing backend block {backend!r}")
    return backend, seed, dict(sampler, kind=kind)


# -- backend builders ----------------------------------------------------------


def _poisson_rates(block: dict) -> np.ndarray:
    x0 = _int_key(block, "x0", "poisson")
    x_end = _int_key(block, "x_end", "poisson")
    rates = _require(block, "rates", "poisson")
    n_states = x_end - x0 + 1
    if isinstance(rates, dict):
        base = float(_require(rates, "base", "poisson.rates"))
        slope = float(_require(rates, "slope", "poisson.rates"))
        return base + slope * np.arange(n_states)
    arr = np.asarray(rates, dtype=float)
    if arr.shape != (n_states,):
        raise ConfigError(f"poisson.rates must list one rate per state ({n_states})")
    return arr


def _build_poisson(block: dict) -> poisson.InhomPoissonSpec:
    try:
        return poisson.InhomPoissonSpec(
            x0=_int_key(block, "x0", "poisson"),
            x_end=_int_key(block, "x_end", "poisson"),
            horizon=float(_require(block, "horizon", "poisson")),
            rates=_poisson_rates(block),
            rate_tilde=float(block["rate_tilde"]) if "rate_tilde" in block else None,
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"poisson block rejected: {e}") from e


def _delaunay_graph(block: dict, wrap: bool) -> tri.DelaunayGraph:
    pts_block = _require(block, "points", "delaunay")
    window = tuple(float(w) for w in _require(pts_block, "window", "delaunay.points"))
    if "csv" in pts_block:
        points = tri.points_from_csv(Path(pts_block["csv"]).read_text())
    else:
        points = tri.sample_poisson_points(
            float(_require(pts_block, "intensity", "delaunay.points")),
            window,
            _int_key(pts_block, "seed", "delaunay.points"),
        )
    if wrap or pts_block.get("torus", False):
        return tri.build_delaunay_torus(points, window)
    return tri.build_delaunay(points, window=window)


def _vertex_index(graph: tri.DelaunayGraph, value, name: str) -> int:
    if value == "center":
        x0, y0, x1, y1 = graph.window
        target = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        target = np.asarray(value, dtype=float)
    elif isinstance(value, int) and not isinstance(value, bool):
        return value
    else:
        raise ConfigError(f"delaunay.{name} must be a vertex index, 'center', or an [x, y] location")
    return int(np.argmin(np.sum((graph.points - target) ** 2, axis=1)))


def _build_delaunay(block: dict, quiet: bool) -> tuple[delaunay.DelaunayBridgeSpec, dict]:
    graph = _delaunay_graph(block, wrap=False)
    atilde_cfg = _require(block, "a_tilde", "delaunay")
    calibration: dict = {}
    if isinstance(atilde_cfg, dict):
        cal = _require(atilde_cfg, "calibrate", "delaunay.a_tilde")
        cal_graph = _delaunay_graph(block, wrap=True)
        a_tilde = delaunay.estimate_atilde(
            cal_graph,
            float(_require(cal, "horizon", "delaunay.a_tilde.calibrate")),
            _int_key(cal, "seed", "delaunay.a_tilde.calibrate"),
        )
        calibration = {"a_tilde": a_tilde, "horizon": cal["horizon"], "seed": cal["seed"]}
    else:
        a_tilde = float(atilde_cfg)
    try:
        spec = delaunay.DelaunayBridgeSpec(
            graph=graph,
            start=_vertex_index(graph, _require(block, "start", "delaunay"), "start"),
            target=_vertex_index(graph, _require(block, "target", "delaunay"), "target"),
            horizon=float(_require(block, "horizon", "delaunay")),
            a_tilde=a_tilde,
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"delaunay block rejected: {e}") from e
    return spec, calibration


def _build_sde_model(block: dict) -> models.GuidedModel:
    name = _require(block, "model", "sde")
    params = dict(block.get("params", {}))
    try:
        if name == "brownian":
            return models.brownian(**params)
        if name == "ou":
            return models.ou(**params)
        if name == "integrated_diffusion":
            return models.integrated_diffusion(**params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"sde model parameters rejected: {e}") from e
    raise ConfigError(f"unknown sde model {name!r}")


def _build_landmark_model(block: dict) -> models.GuidedModel:
    try:
        kernel = lmk.GaussianKernel(**_require(block, "kernel", "landmarks"))
        noise = lmk.NoiseField(
            centers=np.asarray(_require(block, "noise", "landmarks")["centers"], dtype=float),
            gamma=np.asarray(block["noise"]["gamma"], dtype=float),
            tau=float(block["noise"]["tau"]),
        )
        return models.landmarks(
            kernel=kernel,
            noise=noise,
            q0=np.asarray(_require(block, "q0", "landmarks"), dtype=float),
            p0=np.asarray(_require(block, "p0", "landmarks"), dtype=float),
            qT=np.asarray(_require(block, "qT", "landmarks"), dtype=float),
            pT=np.asarray(block["pT"], dtype=float) if "pT" in block else None,
            C=np.asarray(block["C"], dtype=float) if "C" in block else None,
        )
    except (TypeError, ValueError, KeyError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"landmarks block rejected: {e}") from e


def _grid_policy(block: dict, horizon: float):
    grid = block.get("grid", {})
    n_steps = int(grid.get("n_steps", 200))
    n_table = int(grid.get("n_table", 64))
    return sde.refined_grid(horizon, n_steps), sde.refined_grid(horizon, n_table)


# -- samplers ------------------------------------------------------------------


def _jump_paths(simulate, sampler: dict, seed: int):
    """Replicates or an independence chain over a jump backend."""
    if sampler["kind"] == "importance":
        n = _int_key(sampler, "n_paths", "sampler")
        return [simulate(seed, i) for i in range(n)], None
    n_iter = _int_key(sampler, "n_iter", "sampler")
    counter = [0]  # proposal streams start at 1; the chain itself owns index 0

    def propose() -> WeightedPath:
        counter[0] += 1
        return simulate(seed, counter[0])

    mh = core.mh_independence_chain(propose, n_iter, seed)
    return mh.chain, mh


def _sde_paths(model: models.GuidedModel, tables, g, sampler: dict, seed: int,
               endpoint_tol: float):
    if sampler["kind"] == "importance":
        n = _int_key(sampler, "n_paths", "sampler")
        return list(
            sde.simulate_guided_batch(
                model.spec, tables, model.aux, g, seed=seed, n_paths=n,
                endpoint_tol=endpoint_tol,
            )
        ), None
    n_iter = _int_key(sampler, "n_iter", "sampler")
    if sampler["kind"] == "mh_independence":
        counter = [0]

        def propose() -> WeightedPath:
            counter[0] += 1
            return sde.simulate_guided_sde(
                model.spec, tables, model.aux, g, seed=seed,
                index=counter[0], endpoint_tol=endpoint_tol,
            )

        mh = core.mh_independence_chain(propose, n_iter, seed)
        return mh.chain, mh
    # pCN on the driving noise: the proposal keeps the Gaussian reference
    # invariant, so the acceptance ratio is the weight difference alone
    rho = float(sampler.get("rho", 0.9))
    n_steps = g.size - 1
    run = lambda Z: sde.simulate_guided_sde(
        model.spec, tables, model.aux, g, innovations=Z, endpoint_tol=endpoint_tol
    )
    Z = stream(seed, 1).standard_normal((n_steps, model.spec.noise_dim))
    current = run(Z)
    k = 1
    while current.invalid:
        k += 1
        if k > 1000:
            raise RuntimeError("pcn start: 1000 invalid paths in a row")
        Z = stream(seed, k).standard_normal((n_steps, model.spec.noise_dim))
        current = run(Z)
    accept_gen = stream(seed, 0)
    chain = [current]
    accepted = 0
    invalid = 0
    for it in range(n_iter - 1):
        Zp = core.pcn_step(Z, rho, seed, index=k + 1 + it)
        prop = run(Zp)
        if prop.invalid:
            invalid += 1
            chain.append(current)
            continue
        log_ratio = prop.log_psi - current.log_psi
        if log_ratio >= 0 or accept_gen.random() < math.exp(log_ratio):
            current, Z = prop, Zp
            accepted += 1
        chain.append(current)
    rate = accepted / (n_iter - 1) if n_iter > 1 else 1.0
    return chain, core.MHResult(chain, rate, invalid)


# -- artifact writing ------------------------------------------------------------


def _report_dict(rep) -> dict:
    return {
        "estimate": rep.estimate,
        "std_error": rep.std_error,
        "n_samples": rep.n_samples,
        "effective_sample_size": rep.effective_sample_size,
        "invalid_count": rep.invalid_count,
    }


def _chain_block(values: np.ndarray, n_batches: int = 50) -> dict:
    """Chain average with a batch-means standard error (autocorrelation-aware)."""
    n = values.size
    nb = max(2, min(n_batches, n // 10)) if n >= 20 else 2
    usable = (n // nb) * nb
    bm = values[:usable].reshape(nb, -1).mean(axis=1)
    return {
        "estimate": float(values.mean()),
        "std_error": float(bm.std(ddof=1) / math.sqrt(nb)),
        "n_samples": int(n),
        "n_batches": int(nb),
    }


def _write_run_artifacts(out_dir: Path, effective_cfg: dict, seed: int,
                         paths: list, mh, f, functional_name: str,
                         oracle_block: Optional[dict], extra: dict,
                         paths_to_save: int) -> None:
    import scipy

    (out_dir / "paths").mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": effective_cfg,
        "seed": seed,
        "versions": {
            "bridgesim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    rows = ["id,log_psi,sup_V,endpoint_hit"]
    for i, wp in enumerate(paths):
        rows.append(
            f"{i},{fmt(wp.log_psi)},{fmt(wp.sup_v)},{'true' if wp.endpoint_hit else 'false'}"
        )
    (out_dir / "weights.csv").write_text("\n".join(rows) + "\n")

    for i, wp in enumerate(paths[:paths_to_save]):
        (out_dir / "paths" / f"{i:06d}.csv").write_text(path_to_csv(wp.path))

    valid = [w for w in paths if not w.invalid]
    lw = np.array([w.log_psi for w in valid], dtype=float)
    sv = np.array([w.sup_v for w in valid], dtype=float)
    sv = sv[np.isfinite(sv)]
    summary = {
        "backend": effective_cfg["backend"],
        "sampler": effective_cfg.get("sampler", {}).get("kind", "importance"),
        "functional": functional_name,
        "n": len(paths),
        "invalid": len(paths) - len(valid),
        "endpoint_hit_rate": float(np.mean([w.endpoint_hit for w in paths])) if paths else math.nan,
        "diagnostics": {
            "sup_V_max": float(np.max(sv)) if sv.size else math.nan,
            "log_psi_min": float(np.min(lw)) if lw.size else math.nan,
            "log_psi_max": float(np.max(lw)) if lw.size else math.nan,
        },
    }
    summary.update(extra)
    if mh is None:
        estimates = {
            "self_normalized": _report_dict(core.importance_estimate(paths, f, "self_normalized"))
        }
        if oracle_block is not None:
            estimates["exact_h0"] = _report_dict(
                core.importance_estimate(
                    paths, f, "exact_h0",
                    log_h0=oracle_block["log_h0"],
                    log_htilde0=oracle_block["log_htilde0"],
                )
            )
            estimates["exact_h0_normalization"] = _report_dict(
                core.importance_estimate(
                    paths, lambda p: 1.0, "exact_h0",
                    log_h0=oracle_block["log_h0"],
                    log_htilde0=oracle_block["log_htilde0"],
                )
            )
    else:
        vals = np.array([f(w.path) for w in paths], dtype=float)
        estimates = {"chain": _chain_block(vals)}
        summary["acceptance_rate"] = mh.acceptance_rate
        summary["invalid_proposals"] = mh.invalid_proposals
    summary["estimates"] = estimates
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------


def _cmd_run(cfg: dict, args) -> int:
    effective = _effective(cfg, args)
    backend, seed, sampler = _check_common(effective)
    out = effective.get("out")
    if out is None:
        raise ConfigError("output directory required: set 'out' in the config or pass --out")
    paths_to_save = int(effective.get("paths_to_save", 16))
    extra: dict = {}
    oracle_block = None

    if backend == "poisson":
        spec = _build_poisson(effective["poisson"])
        paths, mh = _jump_paths(
            lambda s, i: poisson.simulate_guided_bridge(spec, s, i), sampler, seed
        )
        f = lambda p: float(p.n_jumps)
        functional = "n_jumps"
        table = poisson.exact_h_table(spec, np.array([0.0]))
        oracle_block = {
            "log_h0": math.log(table.h(0.0, spec.x0)),
            "log_htilde0": poisson.log_htilde(spec, 0.0, spec.x0),
        }
    elif backend == "delaunay":
        spec, calibration = _build_delaunay(effective["delaunay"], args.quiet)
        if calibration:
            extra["calibration"] = calibration
        paths, mh = _jump_paths(
            lambda s, i: delaunay.simulate_guided_jump(spec, s, i), sampler, seed
        )
        f = lambda p: float(p.n_jumps)
        functional = "n_jumps"
        if spec.graph.n_vertices <= _ORACLE_VERTEX_CAP:
            table = delaunay.exact_h_small_graph(
                spec.graph, spec.horizon, spec.target, np.array([0.0])
            )
            oracle_block = {
                "log_h0": math.log(table.h(0.0, spec.start)),
                "log_htilde0": delaunay.log_htilde(spec, 0.0, spec.start)
                + delaunay.log_constant(spec),
            }
    else:
        block = effective[backend]
        model = _build_sde_model(block) if backend == "sde" else _build_landmark_model(block)
        if backend == "sde":
            horizon = float(_require(block.get("params", {}), "horizon", f"{backend}.params"))
        else:
            horizon = float(_require(block, "horizon", backend))
        g, table_grid = _grid_policy(block, horizon)
        tables = sde.solve_backward_tables(model.aux, table_grid)
        endpoint_tol = float(block.get("endpoint_tol", 1e-2))
        paths, mh = _sde_paths(model, tables, g, sampler, seed, endpoint_tol)
        aux = model.aux
        f = lambda p: float(np.linalg.norm(aux.L @ p.values[-1] - aux.v))
        functional = "endpoint_gap"

    out_dir = Path(out)
    try:
        _write_run_artifacts(out_dir, effective, seed, paths, mh, f, functional,
                             oracle_block, extra, paths_to_save)
    except OSError as e:
        print(json.dumps({"error": "unwritable_output", "message": str(e)}), file=sys.stderr)
        return EXIT_OUTPUT
    if not args.quiet:
        print(f"wrote {len(paths)} paths to {out_dir}")
    return EXIT_OK


def _validate_poisson(block: dict, errors: list, warnings_: list) -> None:
    for key in ("x0", "x_end", "horizon", "rates"):
        if key not in block:
            errors.append(f"poisson: missing key {key!r}")
    if errors:
        return
    try:
        rates = _poisson_rates(block)
    except ConfigError as e:
        errors.append(str(e))
        return
    if block["x_end"] < block["x0"]:
        errors.append("poisson: x_end must be >= x0")
    if np.any(rates <= 0):
        errors.append("poisson: all rates must be positive")
    if float(block.get("horizon", 0)) <= 0:
        errors.append("poisson: horizon must be positive")
    rt = block.get("rate_tilde")
    if rt is not None and rates.size and float(rt) > float(np.min(rates)):
        warnings_.append(
            "poisson: rate_tilde exceeds min(rates); the weight-control "
            "condition rate_tilde <= min(rates) fails and importance weights "
            "may be heavy-tailed"
        )


def _validate_delaunay(block: dict, errors: list, warnings_: list) -> None:
    pts = block.get("points")
    if not isinstance(pts, dict):
        errors.append("delaunay: missing points block")
    else:
        if "window" not in pts:
            errors.append("delaunay.points: missing window")
        if "csv" not in pts and ("intensity" not in pts or "seed" not in pts):
            errors.append("delaunay.points: need either csv or intensity+seed")
        if "intensity" in pts and float(pts["intensity"]) <= 0:
            errors.append("delaunay.points: intensity must be positive")
    for key in ("start", "target", "horizon", "a_tilde"):
        if key not in block:
            errors.append(f"delaunay: missing key {key!r}")
    if float(block.get("horizon", 1)) <= 0:
        errors.append("delaunay: horizon must be positive")
    at = block.get("a_tilde")
    if isinstance(at, dict):
        cal = at.get("calibrate")
        if not isinstance(cal, dict) or "horizon" not in cal or "seed" not in cal:
            errors.append("delaunay.a_tilde.calibrate needs horizon and seed")
    elif at is not None and not (isinstance(at, (int, float)) and float(at) > 0):
        errors.append("delaunay: a_tilde must be positive or a calibrate block")


def _validate_grid(block: dict, where: str, errors: list) -> None:
    grid = block.get("grid", {})
    n_steps = grid.get("n_steps", 200)
    n_table = grid.get("n_table", 64)
    if n_steps < 100:
        errors.append(
            f"{where}.grid: n_steps must be >= 100 so the last refined step "
            "stays within 1e-4 of the horizon"
        )
    if n_table < 32:
        errors.append(f"{where}.grid: n_table must be >= 32 for table accuracy near the horizon")
    if float(block.get("endpoint_tol", 1e-2)) <= 0:
        errors.append(f"{where}: endpoint_tol must be positive")


def _validate_sde(block: dict, errors: list, warnings_: list) -> None:
    name = block.get("model")
    if name not in ("brownian", "ou", "integrated_diffusion"):
        errors.append(f"sde: unknown model {name!r}")
        return
    params = block.get("params", {})
    if "horizon" not in params:
        errors.append("sde.params: missing horizon")
    elif float(params["horizon"]) <= 0:
        errors.append("sde.params: horizon must be positive")
    if name == "integrated_diffusion":
        base = float(params.get("gamma_base", 1.0))
        amp = float(params.get("gamma_amp", 0.5))
        if base <= abs(amp):
            errors.append("sde.params: gamma_base must exceed |gamma_amp| to keep the noise elliptic in the driven coordinate")
    _validate_grid(block, "sde", errors)


def _validate_landmarks(block: dict, errors: list, warnings_: list) -> None:
    for key in ("kernel", "noise", "q0", "p0", "qT", "horizon"):
        if key not in block:
            errors.append(f"landmarks: missing key {key!r}")
    if errors:
        return
    try:
        q0 = np.asarray(block["q0"], dtype=float)
        p0 = np.asarray(block["p0"], dtype=float)
        qT = np.asarray(block["qT"], dtype=float)
        if q0.ndim != 2 or q0.shape != p0.shape or q0.shape != qT.shape:
            errors.append("landmarks: q0, p0, qT must share one (n, d) shape")
            return
        noise = lmk.NoiseField(
            centers=np.asarray(block["noise"]["centers"], dtype=float),
            gamma=np.asarray(block["noise"]["gamma"], dtype=float),
            tau=float(block["noise"]["tau"]),
        )
        lmk.GaussianKernel(**block["kernel"])
    except (TypeError, ValueError, KeyError) as e:
        errors.append(f"landmarks: {e}")
        return
    n, d = q0.shape
    rep = lmk.validate_noise_rank(
        noise, n, d, qT,
        pT=np.asarray(block["pT"], dtype=float) if "pT" in block else None,
    )
    if not rep.passes:
        errors.append(f"landmarks: {rep.message}")
    _validate_grid(block, "landmarks", errors)


def _cmd_validate(cfg: dict, args) -> int:
    effective = _effective(cfg, args)
    errors: list = []
    warnings_: list = []
    backend = effective.get("backend")
    if backend not in BACKENDS:
        errors.append(f"unknown backend {backend!r}")
    if "seed" not in effective:
        errors.append("seed is mandatory (wall-clock seeding is not supported)")
    elif isinstance(effective["seed"], bool) or not isinstance(effective["seed"], int):
        errors.append("seed must be an integer")
    sampler = effective.get("sampler", {})
    kind = sampler.get("kind", "importance")
    if kind not in SAMPLERS:
        errors.append(f"unknown sampler kind {kind!r}")
    elif kind == "pcn" and backend in ("poisson", "delaunay"):
        errors.append("pcn sampling needs a driving-noise backend (sde or landmarks)")
    if backend in BACKENDS:
        block = effective.get(backend)
        if not isinstance(block, dict):
            errors.append(f"missing backend block {backend!r}")
        else:
            {
                "poisson": _validate_poisson,
                "delaunay": _validate_delaunay,
                "sde": _validate_sde,
                "landmarks": _validate_landmarks,
            }[backend](block, errors, warnings_)
    report = {"errors": errors, "warnings": warnings_, "ok": not errors}
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_calibrate(cfg: dict, args) -> int:
    effective = _effective(cfg, args)
    backend = effective.get("backend")
    if backend != "delaunay":
        raise BackendError("calibrate-atilde applies to the delaunay backend only")
    block = effective.get("delaunay")
    if not isinstance(block, dict):
        raise ConfigError("missing backend block 'delaunay'")
    at = block.get("a_tilde")
    cal = at.get("calibrate") if isinstance(at, dict) else effective.get("calibrate")
    if not isinstance(cal, dict):
        raise ConfigError(
            "calibration parameters required: delaunay.a_tilde.calibrate "
            "(or a top-level calibrate block) with horizon and seed"
        )
    graph = _delaunay_graph(block, wrap=True)
    a_tilde = delaunay.estimate_atilde(
        graph,
        float(_require(cal, "horizon", "calibrate")),
        _int_key(cal, "seed", "calibrate"),
    )
    result = {
        "a_tilde": a_tilde,
        "horizon": float(cal["horizon"]),
        "seed": cal["seed"],
        "n_vertices": graph.n_vertices,
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    out = effective.get("out") if args.out is None else args.out
    if out is not None:
        out_dir = Path(out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "calibration.json").write_text(
                json.dumps(result, indent=2, sort_keys=True) + "\n"
            )
        except OSError as e:
            print(json.dumps({"error": "unwritable_output", "message": str(e)}), file=sys.stderr)
            return EXIT_OUTPUT
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bridgesim",
        description="guided-bridge experiment runner (see module docstring for the config schema)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "simulate and write manifest/paths/weights/summary artifacts"),
        ("validate", "check a config without simulating; prints a JSON report"),
        ("calibrate-atilde", "estimate the Delaunay walk diffusivity from its quadratic variation"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--paths", type=int, default=None, metavar="N",
                       help="override n_paths (importance) or n_iter (chains)")
        p.add_argument("--quiet", action="store_true", help="suppress non-error output and warnings")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            if args.command == "run":
                return _cmd_run(cfg, args)
            if args.command == "validate":
                return _cmd_validate(cfg, args)
            return _cmd_calibrate(cfg, args)
    except ConfigError as e:
        print(json.dumps({"error": "malformed_config", "message": str(e)}), file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as e:
        print(json.dumps({"error": "unknown_backend", "message": str(e)}), file=sys.stderr)
        return EXIT_BACKEND
    except OSError as e:
        print(json.dumps({"error": "unwritable_output", "message": str(e)}), file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
