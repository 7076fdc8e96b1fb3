"""Windowed life-time statistics and filtered-derivative processes.

At an analysis time t with window size h and scale n, the statistic
compares the event count of the right window (nt, n(t+h)] with the count
of the left window (n(t-h), nt].  Three normalisations of that count
difference are provided:

* D: divided by the known constant scaling sqrt(2nh sigma2/mu^3),
* Gamma: centered by the expectation hat m_t and divided by the
  time-dependent scaling s_t (both require the generating model),
* G: divided by the estimated scaling s_hat built from the empirical
  mean and variance of the life times inside each window half.

The life time straddling a window's left edge belongs to an event before
the window, so it is excluded from the window estimators: a window with
k events contributes k-1 life times to the mean (divisor k-1) and the
same k-1 squared deviations to the variance (divisor k-2).  Windows with
too few events fall back to the zero convention, and a zero mean or zero
variance makes the window contribute nothing to s_hat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .renewal import EventSequence, WindowConfig, ChangePointModel
from .series import StatisticSeries, read_series_csv, write_series_csv
from .theory import TheoryParams, m_function, s_function

__all__ = [
    "WindowStats",
    "WindowEstimateSeries",
    "StatisticSeries",
    "window_stats_right",
    "window_stats_left",
    "s_hat",
    "window_estimate_series",
    "D_process",
    "G_process",
    "Gamma_process",
    "read_series_csv",
    "write_series_csv",
]

_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class WindowStats:
    """Empirical life-time statistics of one window half.

    mean_hat is 0 when the window holds at most one event, var_hat is 0
    when it holds at most two; both are otherwise strictly positive
    (life times are positive).
    """

    mean_hat: float
    var_hat: float
    count: int


def _check_window(seq: EventSequence, n: int, lo_t: float, hi_t: float) -> None:
    tol = _EDGE_TOL * max(1.0, seq.horizon)
    if n * hi_t > seq.horizon + tol:
        raise ValueError(
            f"window end {n * hi_t} exceeds event horizon {seq.horizon}")
    if n * lo_t < -tol:
        raise ValueError(f"window start {n * lo_t} lies before time zero")


def _stats_between(seq: EventSequence, lo: int, hi: int) -> WindowStats:
    """Stats over life times of events with (0-based count) index in (lo, hi]."""
    count = hi - lo
    if count <= 1:
        return WindowStats(0.0, 0.0, count)
    xi = seq.life_times()[lo + 1:hi]  # drop the life time straddling the left edge
    mean = float(xi.sum() / (count - 1))
    if count <= 2:
        return WindowStats(mean, 0.0, count)
    var = float(((xi - mean) ** 2).sum() / (count - 2))
    return WindowStats(mean, var, count)


def window_stats_right(seq: EventSequence, t: float, h: float, n: int = 1) -> WindowStats:
    """Life-time mean/variance of the right window (nt, n(t+h)]."""
    _check_window(seq, n, t, t + h)
    return _stats_between(seq, seq.count_at(n * t), seq.count_at(n * (t + h)))


def window_stats_left(seq: EventSequence, t: float, h: float, n: int = 1) -> WindowStats:
    """Life-time mean/variance of the left window (n(t-h), nt]."""
    _check_window(seq, n, t - h, t)
    return _stats_between(seq, seq.count_at(n * (t - h)), seq.count_at(n * t))


def _scaling_term(ws: WindowStats) -> float:
    if ws.mean_hat <= 0.0 or ws.var_hat <= 0.0:
        return 0.0
    return ws.var_hat / ws.mean_hat**3


def s_hat(seq: EventSequence, t: float, h: float, n: int = 1) -> float:
    """Estimated scaling sqrt((v_ri/m_ri^3 + v_le/m_le^3) * n * h).

    A window half whose mean or variance estimate is zero contributes
    nothing; 0.0 therefore signals that the statistic is undefined at t.
    """
    term = _scaling_term(window_stats_right(seq, t, h, n)) \
        + _scaling_term(window_stats_left(seq, t, h, n))
    return math.sqrt(term * n * h)


# ---------------------------------------------------------------------------
# vectorised evaluation over a grid


@dataclass(frozen=True, eq=False)
class WindowEstimateSeries:
    """Per-node window statistics over a grid (arrays share the grid's length)."""

    grid: np.ndarray
    count_left: np.ndarray
    count_right: np.ndarray
    mean_left: np.ndarray
    mean_right: np.ndarray
    var_left: np.ndarray
    var_right: np.ndarray
    count_diff: np.ndarray   # right count minus left count
    s_hat: np.ndarray        # estimated scaling, 0 where undefined


def window_estimate_series(seq: EventSequence, grid: np.ndarray, h: float,
                           n: int = 1) -> WindowEstimateSeries:
    """Evaluate both window halves at every grid node in O(log N) per node."""
    grid = np.asarray(grid, dtype=float)
    if grid.size:
        _check_window(seq, n, grid[0] - h, grid[-1] + h)
    if len(seq) == 0:
        zeros = np.zeros(grid.size)
        counts = np.zeros(grid.size, dtype=int)
        return WindowEstimateSeries(
            grid=grid, count_left=counts, count_right=counts.copy(),
            mean_left=zeros, mean_right=zeros.copy(), var_left=zeros.copy(),
            var_right=zeros.copy(), count_diff=zeros.copy(), s_hat=zeros.copy())
    s = seq.events
    xi = seq.life_times()
    sq = np.concatenate(([0.0], np.cumsum(xi * xi)))
    last = max(len(s) - 1, 0)

    le = np.searchsorted(s, n * (grid - h), side="right")
    mi = np.searchsorted(s, n * grid, side="right")
    ri = np.searchsorted(s, n * (grid + h), side="right")

    def half(lo, hi):
        cnt = hi - lo
        many = cnt > 1
        # sum of life times with 0-based index in [lo+1, hi-1] via event-time
        # partial sums; gather is clipped and masked where cnt <= 1
        tot = s[np.clip(hi - 1, 0, last)] - s[np.clip(lo, 0, last)]
        mean = np.where(many, tot / np.maximum(cnt - 1, 1), 0.0)
        totsq = sq[hi] - sq[np.minimum(lo + 1, hi)]
        var = (totsq - np.maximum(cnt - 1, 1) * mean**2) / np.maximum(cnt - 2, 1)
        var = np.where(cnt > 2, np.maximum(var, 0.0), 0.0)
        return cnt, np.where(many, mean, 0.0), var

    cnt_l, mean_l, var_l = half(le, mi)
    cnt_r, mean_r, var_r = half(mi, ri)

    def term(mean, var):
        ok = (mean > 0.0) & (var > 0.0)
        return np.where(ok, var / np.where(ok, mean, 1.0) ** 3, 0.0)

    shat = np.sqrt((term(mean_r, var_r) + term(mean_l, var_l)) * n * h)
    return WindowEstimateSeries(
        grid=grid, count_left=cnt_l, count_right=cnt_r,
        mean_left=mean_l, mean_right=mean_r, var_left=var_l, var_right=var_r,
        count_diff=(cnt_r - cnt_l).astype(float), s_hat=shat)


# ---------------------------------------------------------------------------
# the three statistic processes


def D_process(seq: EventSequence, cfg: WindowConfig, h: float, n: int,
              mu: float, sigma2: float) -> StatisticSeries:
    """Count difference scaled by the known constant sqrt(2nh sigma2/mu^3)."""
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError(f"mu must be positive, got {mu}")
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    grid = cfg.grid(h)
    est = window_estimate_series(seq, grid, h, n)
    scale = math.sqrt(2.0 * n * h * sigma2 / mu**3)
    return StatisticSeries(grid=grid, values=est.count_diff / scale,
                           valid=np.ones(grid.size, dtype=bool),
                           h=h, n=n, grid_step=cfg.grid_step)


def Gamma_process(seq: EventSequence, cfg: WindowConfig, h: float, n: int,
                  model: ChangePointModel) -> StatisticSeries:
    """Count difference centered by m_t and scaled by s_t of the model.

    Requires the generating model (laboratory use); the given scale n
    overrides the model's own and must match the simulated sequence.
    """
    p = TheoryParams.from_model(model, h=h, n=n)
    grid = cfg.grid(h)
    est = window_estimate_series(seq, grid, h, n)
    values = (est.count_diff - m_function(grid, p)) / s_function(grid, p)
    return StatisticSeries(grid=grid, values=values,
                           valid=np.ones(grid.size, dtype=bool),
                           h=h, n=n, grid_step=cfg.grid_step)


def G_process(seq: EventSequence, cfg: WindowConfig, h: float, n: int) -> StatisticSeries:
    """Count difference scaled by the estimated s_hat.

    Nodes where s_hat is zero carry value 0.0 and valid=False instead of
    aborting the path: a single empty window must not kill the series.
    """
    grid = cfg.grid(h)
    est = window_estimate_series(seq, grid, h, n)
    valid = est.s_hat > 0.0
    values = np.where(valid, est.count_diff / np.where(valid, est.s_hat, 1.0), 0.0)
    return StatisticSeries(grid=grid, values=values, valid=valid,
                           h=h, n=n, grid_step=cfg.grid_step)
