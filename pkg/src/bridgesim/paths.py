"""Path containers and their file formats.

Two trajectory layouts cover every backend: piecewise-constant paths for
jump processes (integer state labels, cadlag) and grid paths for diffusions
(values plus the driving noise increments, so a path can be replayed or
perturbed). A WeightedPath bundles a trajectory with its importance weight
and diagnostics.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np


@dataclass(frozen=True)
class PiecewiseConstantPath:
    """Cadlag step function on [0, horizon].

    states[k] holds on [jump_times[k-1], jump_times[k]) with the convention
    jump_times[-1] := 0, so there is one more state than jump time.
    """

    jump_times: np.ndarray  # (k,) strictly increasing, inside (0, horizon)
    states: np.ndarray      # (k+1,) integer state labels
    horizon: float

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        st = np.asarray(self.states)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "states", st)
        if jt.ndim != 1 or st.ndim != 1 or st.shape[0] != jt.shape[0] + 1:
            raise ValueError("need exactly one more state than jump time")
        if jt.size and (np.any(np.diff(jt) <= 0) or jt[0] <= 0 or jt[-1] >= self.horizon):
            raise ValueError("jump times must be strictly increasing inside (0, horizon)")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.shape[0])

    def intervals(self) -> Iterator[tuple[float, float, int]]:
        """Yield (start, end, state) for each constancy interval, covering [0, horizon]."""
        edges = np.concatenate(([0.0], self.jump_times, [self.horizon]))
        for k in range(self.states.shape[0]):
            yield float(edges[k]), float(edges[k + 1]), self.states[k]

    def state_at(self, t: float):
        """State at time t (cadlag convention)."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError("t outside [0, horizon]")
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.states[k]

    @property
    def final_state(self):
        return self.states[-1]


@dataclass(frozen=True)
class GridPath:
    """Discrete trajectory on a time grid, with its driving noise increments.

    values[i] is the state at times[i]; innovations[i] is the standard normal
    vector that produced the step times[i] -> times[i+1], retained so samplers
    can re-drive the same path or propose correlated ones.
    """

    times: np.ndarray        # (N+1,) increasing, times[0] = 0
    values: np.ndarray       # (N+1, d)
    innovations: np.ndarray  # (N, d_noise)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        z = np.asarray(self.innovations, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if z.ndim == 1:
            z = z[:, None]
        if v.shape[0] != t.shape[0]:
            raise ValueError("values and times length mismatch")
        if z.shape[0] != t.shape[0] - 1:
            raise ValueError("innovations must have one row per grid step")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "innovations", z)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.values[-1]


Path = Union[PiecewiseConstantPath, GridPath]


@dataclass(frozen=True)
class WeightedPath:
    """A simulated trajectory with its log importance weight and diagnostics.

    log_psi is the log likelihood-ratio weight accumulated along the path
    (backend-specific constants excluded; see each backend's weight routine).
    Paths whose weight evaluation produced a non-finite number are flagged
    invalid rather than dropped, so estimators can report them.
    """

    path: Path
    log_psi: float
    sup_v: float
    endpoint_hit: bool
    seed: Optional[int] = None
    invalid: bool = field(default=False)

    def __post_init__(self):
        if not math.isfinite(self.log_psi) and not self.invalid:
            object.__setattr__(self, "invalid", True)


@dataclass(frozen=True)
class EstimateReport:
    """Monte Carlo estimate with its sampling error and weight diagnostics."""

    estimate: float
    std_error: float
    n_samples: int
    effective_sample_size: float
    invalid_count: int = 0


# -- file formats -----------------------------------------------------------
#
# A path CSV holds one row per sample point: a time column then one column
# per state component. The JSON envelope (sidecar or embedded) carries
# log_psi, sup_V, endpoint_hit and seed. Floats print with 17 significant
# digits so round-trips are bit exact.

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def path_to_csv(path: Path) -> str:
    lines = []
    if isinstance(path, PiecewiseConstantPath):
        lines.append("time,state")
        for s0, _s1, x in path.intervals():
            lines.append(f"{fmt(s0)},{int(x)}")
        lines.append(f"{fmt(path.horizon)},{int(path.final_state)}")
    else:
        d = path.values.shape[1]
        lines.append(",".join(["time"] + [f"x{j}" for j in range(d)]))
        for i in range(path.times.shape[0]):
            row = [fmt(path.times[i])] + [fmt(v) for v in path.values[i]]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def weighted_path_envelope(wp: WeightedPath) -> dict:
    return {
        "log_psi": wp.log_psi,
        "sup_V": wp.sup_v,
        "endpoint_hit": bool(wp.endpoint_hit),
        "seed": wp.seed,
        "invalid": bool(wp.invalid),
    }


def piecewise_path_to_json(path: PiecewiseConstantPath) -> str:
    return json.dumps(
        {
            "kind": "piecewise_constant",
            "horizon": path.horizon,
            "jump_times": [float(t) for t in path.jump_times],
            "states": [int(s) for s in path.states],
        }
    )


def piecewise_path_from_json(text: str) -> PiecewiseConstantPath:
    obj = json.loads(text)
    if obj.get("kind") != "piecewise_constant":
        raise ValueError("not a piecewise-constant path record")
    return PiecewiseConstantPath(
        jump_times=np.array(obj["jump_times"], dtype=float),
        states=np.array(obj["states"], dtype=int),
        horizon=float(obj["horizon"]),
    )


def grid_path_to_json(path: GridPath) -> str:
    return json.dumps(
        {
            "kind": "grid",
            "times": [float(t) for t in path.times],
            "values": [[float(v) for v in row] for row in path.values],
            "innovations": [[float(v) for v in row] for row in path.innovations],
        }
    )


def grid_path_from_json(text: str) -> GridPath:
    obj = json.loads(text)
    if obj.get("kind") != "grid":
        raise ValueError("not a grid path record")
    return GridPath(
        times=np.array(obj["times"], dtype=float),
        values=np.array(obj["values"], dtype=float),
        innovations=np.array(obj["innovations"], dtype=float),
    )
