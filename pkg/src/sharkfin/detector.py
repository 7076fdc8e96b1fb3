"""Monte-Carlo rejection threshold and the multiple-filter change-point test.

The null hypothesis of constant rate is rejected when the largest
absolute value of the estimated-scaling statistic over all grid times
and all window sizes exceeds a threshold Q.  Q is the empirical upper
quantile of that maximum under the null, obtained by simulating the
Gaussian limit process: each replicate draws one Brownian path shared by
every window size, as the multiple-filter construction requires.

After a rejection, change points are located per window size by
successive argmax: take the largest remaining |G|, record its time,
retire the surrounding h-neighbourhood, and repeat while the maximum
still exceeds Q.  Estimates from different window sizes are then merged,
smallest window first, dropping any estimate that lands within
min(h, h') of one already accepted (finer windows localise better).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .filtered import G_process
from .renewal import ConfigurationError, EventSequence, WindowConfig, substream
from .series import StatisticSeries
from .theory import _brownian_paths

__all__ = [
    "ThresholdTable",
    "ChangePointEstimate",
    "DetectionResult",
    "simulate_threshold",
    "threshold_cache_key",
    "detect",
    "estimate_change_points",
    "merge_across_windows",
]


def threshold_cache_key(T, h_set, grid_step, alpha, n_sims, seed) -> str:
    """Content hash identifying a threshold configuration for caching."""
    blob = json.dumps({"T": float(T), "alpha": float(alpha),
                       "grid_step": float(grid_step),
                       "h_set": sorted(float(h) for h in h_set),
                       "n_sims": int(n_sims), "seed": int(seed)},
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]

# Replicates are simulated in fixed-size blocks with one RNG sub-stream per
# block, so results are identical for any worker count.
_BLOCK = 1024


def _upper_quantile(values: np.ndarray, alpha: float) -> float:
    """Order statistic at rank ceil((1-alpha)*n); conservative and exact."""
    v = np.sort(values)
    k = int(math.ceil((1.0 - alpha) * v.size - 1e-9))
    return float(v[min(max(k, 1), v.size) - 1])


def _h0_block(T: float, h_set: tuple, grid_step: float, seed: int,
              block: int, size: int) -> np.ndarray:
    """Per-window-size maxima of |L| for one block of null replicates."""
    cfg = WindowConfig(T, h_set, grid_step)
    rng = substream(seed, block)
    w = _brownian_paths(rng, size, cfg.lattice_size(), grid_step)
    out = np.empty((size, len(cfg.h_set)))
    for i, h in enumerate(cfg.h_set):
        jg = cfg.grid_indices(h)
        k = cfg.lattice_index(h, "window size")
        paths = (w[:, jg + k] - 2.0 * w[:, jg] + w[:, jg - k]) / math.sqrt(2.0 * h)
        out[:, i] = np.max(np.abs(paths), axis=1)
    return out


def _h0_block_job(args) -> np.ndarray:
    return _h0_block(*args)


@dataclass(frozen=True)
class ThresholdTable:
    """Null-distribution quantiles of the multi-window maximum statistic."""

    alpha: float
    h_set: tuple
    T: float
    grid_step: float
    n_sims: int
    seed: int
    Q: float
    per_h_max_quantiles: dict

    def config_dict(self) -> dict:
        return {"T": self.T, "alpha": self.alpha, "grid_step": self.grid_step,
                "h_set": list(self.h_set), "n_sims": self.n_sims, "seed": self.seed}

    def cache_key(self) -> str:
        return threshold_cache_key(self.T, self.h_set, self.grid_step,
                                   self.alpha, self.n_sims, self.seed)

    def to_json(self) -> str:
        d = dict(self.config_dict(), Q=self.Q,
                 per_h_max_quantiles={repr(h): q for h, q in
                                      sorted(self.per_h_max_quantiles.items())})
        return json.dumps(d, sort_keys=True, indent=2)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ThresholdTable":
        with open(path) as fh:
            d = json.load(fh)
        return cls(alpha=d["alpha"], h_set=tuple(sorted(d["h_set"])), T=d["T"],
                   grid_step=d["grid_step"], n_sims=int(d["n_sims"]),
                   seed=int(d["seed"]), Q=d["Q"],
                   per_h_max_quantiles={float(h): q for h, q in
                                        d["per_h_max_quantiles"].items()})


def simulate_threshold(T: float, h_set, grid_step: float, alpha: float,
                       n_sims: int, seed: int, workers: int = 1) -> ThresholdTable:
    """Empirical (1-alpha)-quantile of max over (h, t) of |L| under the null.

    Deterministic given the seed, independent of the worker count.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if n_sims < 100:
        raise ConfigurationError(f"need at least 100 simulations, got {n_sims}")
    cfg = WindowConfig(T, h_set, grid_step)

    sizes = [_BLOCK] * (n_sims // _BLOCK)
    if n_sims % _BLOCK:
        sizes.append(n_sims % _BLOCK)
    jobs = [(T, cfg.h_set, grid_step, seed, b, size) for b, size in enumerate(sizes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_h0_block_job, jobs))
    else:
        parts = [_h0_block_job(job) for job in jobs]
    per_h = np.vstack(parts)

    maxima = per_h.max(axis=1)
    return ThresholdTable(
        alpha=alpha, h_set=cfg.h_set, T=T, grid_step=grid_step, n_sims=n_sims,
        seed=seed, Q=_upper_quantile(maxima, alpha),
        per_h_max_quantiles={h: _upper_quantile(per_h[:, i], alpha)
                             for i, h in enumerate(cfg.h_set)})


# ---------------------------------------------------------------------------
# detection and estimation


class ChangePointEstimate(NamedTuple):
    location: float
    h: float
    value: float


@dataclass(frozen=True, eq=False)
class DetectionResult:
    reject: bool
    Q: float
    global_max: float
    change_points: tuple
    per_h_series: dict

    def to_json_dict(self, series_paths: Mapping[float, str] | None = None) -> dict:
        d = {
            "reject": self.reject,
            "Q": self.Q,
            "global_max": self.global_max,
            "change_points": [
                {"location": cp.location, "h": cp.h, "value": cp.value}
                for cp in self.change_points],
        }
        if series_paths is not None:
            d["series"] = {repr(h): str(series_paths[h]) for h in sorted(series_paths)}
        return d


def estimate_change_points(series: StatisticSeries, Q: float, h: float) -> list:
    """Successive argmax estimation on one statistic series.

    Returns the ascending list of grid times found before the remaining
    maximum drops to Q or below.  Each accepted time retires all grid
    nodes in the open interval (t*-h, t*+h), so within one window size
    the estimates are pairwise at least h apart.
    """
    magnitude = np.abs(series.values)
    alive = series.valid.copy()
    found = []
    while alive.any():
        masked = np.where(alive, magnitude, -np.inf)
        idx = int(np.argmax(masked))
        if masked[idx] <= Q:
            break
        t_star = float(series.grid[idx])
        found.append(t_star)
        alive &= ~((series.grid > t_star - h) & (series.grid < t_star + h))
    return sorted(found)


def merge_across_windows(per_h: Mapping[float, Iterable[float]]) -> list:
    """Combine per-window-size estimates into one ordered list of (c, h).

    Window sizes are processed in ascending order; an estimate is dropped
    when it lies within min(h, h') of an already accepted one, so the
    finer window wins ties on the same change point.
    """
    accepted: list = []
    for h in sorted(per_h):
        for cand in sorted(per_h[h]):
            if all(abs(cand - loc) >= min(h, h_prev) for loc, h_prev in accepted):
                accepted.append((float(cand), float(h)))
    return sorted(accepted)


def detect(seq: EventSequence, T: float, n: int, h_set,
           table: ThresholdTable) -> DetectionResult:
    """Run the multiple-filter test on an event sequence.

    The statistic uses the estimated scaling, as parameters are unknown
    in practice.  Deterministic given (seq, table).
    """
    cfg = WindowConfig(T, h_set, table.grid_step)
    if not math.isclose(table.T, T, rel_tol=1e-12):
        raise ConfigurationError(
            f"threshold table was built for T={table.T}, not T={T}")
    if len(table.h_set) != len(cfg.h_set) or any(
            not math.isclose(a, b, rel_tol=1e-12)
            for a, b in zip(table.h_set, cfg.h_set)):
        raise ConfigurationError(
            f"threshold table windows {table.h_set} != requested {cfg.h_set}")
    if not math.isclose(seq.horizon, n * T, rel_tol=1e-9):
        raise ConfigurationError(
            f"event horizon {seq.horizon} does not match n*T = {n * T}")

    per_h_series = {h: G_process(seq, cfg, h, n) for h in cfg.h_set}
    global_max = max(series.max_abs() for series in per_h_series.values())
    reject = global_max > table.Q

    change_points = ()
    if reject:
        per_h_estimates = {h: estimate_change_points(series, table.Q, h)
                           for h, series in per_h_series.items()}
        merged = merge_across_windows(per_h_estimates)
        out = []
        for loc, h in merged:
            series = per_h_series[h]
            idx = int(round((loc - series.grid[0]) / table.grid_step))
            out.append(ChangePointEstimate(loc, h, float(series.values[idx])))
        change_points = tuple(out)
    return DetectionResult(reject=reject, Q=table.Q, global_max=global_max,
                           change_points=change_points, per_h_series=per_h_series)
