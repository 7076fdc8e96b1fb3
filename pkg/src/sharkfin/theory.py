"""Deterministic theory of the filtered-derivative statistic near a change point.

For a change point at c where the life-time law switches from
(mu1, sigma1_sq) to (mu2, sigma2_sq), the windowed count difference has

* an expectation (hat function) m_t that is zero outside the
  h-neighbourhood of c and peaks at c with height n*(1/mu2 - 1/mu1)*h,
* a standard deviation s_t that is flat at sqrt(2nh sigma_i^2/mu_i^3) on
  either side and linearly interpolated (in the variance) across the
  neighbourhood.

Their ratio m/s is the systematic deviation of the statistic: hat shaped
when only the rate changes, shaped like a shark's fin when the variance
changes too, with its largest deviation always at c.

When the scaling must be estimated from the data, the windowed mean and
variance estimators are biased inside the h-neighbourhood.  Their limits
are the interpolations mu_ri/mu_le (harmonic in the expected counts) and
sigma2_ri/sigma2_le (a two-population mixture variance), and the induced
multiplicative error on the statistic is the distortion
delta_t = s_t / s_tilde_t, identically 1 away from c and exactly 1 at c.

The zero-mean, unit-variance Gaussian limit process of the statistic is
built from increments of a single Brownian path over the two windows,
with weighted branch forms inside the change-point neighbourhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from scipy.special import ndtr

from .renewal import ChangePointModel, ConfigurationError, WindowConfig, substream
from .series import StatisticSeries

__all__ = [
    "TheoryParams",
    "SharkShape",
    "m_function",
    "s_function",
    "shark_fin",
    "classify_shark",
    "mu_ri_theory",
    "mu_le_theory",
    "sigma2_ri_theory",
    "sigma2_le_theory",
    "s_tilde",
    "distortion",
    "normal_cdf",
    "detection_bound",
    "simulate_L",
    "simulate_L_paths",
]

_REL_TOL = 1e-12


@dataclass(frozen=True)
class TheoryParams:
    """Process parameters entering the closed-form theory objects."""

    mu1: float
    mu2: float
    sigma1_sq: float
    sigma2_sq: float
    c: float
    T: float
    h: float
    n: int = 1

    def __post_init__(self):
        for name in ("mu1", "mu2", "sigma1_sq", "sigma2_sq"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if not (self.T > 0 and 0 < self.c <= self.T):
            raise ValueError(f"need 0 < c <= T, got c={self.c}, T={self.T}")
        if not (0 < self.h <= self.T / 2):
            raise ValueError(f"window size must lie in (0, T/2], got h={self.h}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"scale n must be a positive integer, got {self.n}")

    @classmethod
    def from_model(cls, model: ChangePointModel, h: float,
                   n: Optional[int] = None) -> "TheoryParams":
        return cls(model.phi1.mu, model.phi2.mu, model.phi1.sigma2, model.phi2.sigma2,
                   model.c, model.T, h, int(model.n if n is None else n))

    @property
    def ratio1(self) -> float:
        """sigma1^2 / mu1^3, the count-variance rate of the first law."""
        return self.sigma1_sq / self.mu1**3

    @property
    def ratio2(self) -> float:
        return self.sigma2_sq / self.mu2**3

    def at_scale(self, n: int) -> "TheoryParams":
        return replace(self, n=int(n))


class SharkShape(Enum):
    """Orientation of the systematic deviation m/s near the change point."""

    FLAT = "flat"                          # no rate change: identically zero
    HAT = "hat"                            # rate change, constant scaling
    WEST_FIN = "west_fin"                  # m >= 0, s increasing
    EAST_FIN = "east_fin"                  # m >= 0, s decreasing
    WEST_FIN_INVERTED = "west_fin_inverted"  # m <= 0, s increasing
    EAST_FIN_INVERTED = "east_fin_inverted"  # m <= 0, s decreasing


def _eval(t, fn):
    """Apply fn to t viewed as a 1-d float array; return scalar for scalar t."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = fn(arr)
    return float(out[0]) if np.ndim(t) == 0 else out


def m_function(t, p: TheoryParams):
    """Expected windowed count difference; a hat over (c-h, c+h), else 0."""
    def fn(tt):
        gap = np.abs(tt - p.c)
        return np.where(gap > p.h, 0.0,
                        p.n * (1.0 / p.mu2 - 1.0 / p.mu1) * (p.h - gap))
    return _eval(t, fn)


def s_function(t, p: TheoryParams):
    """Standard deviation of the windowed count difference.

    Flat at sqrt(2nh sigma_i^2/mu_i^3) outside the h-neighbourhood of c;
    the variance is linearly interpolated across it.
    """
    r1, r2 = p.ratio1, p.ratio2
    def fn(tt):
        var = np.where(
            np.abs(tt - p.c) <= p.h,
            p.n * ((tt + p.h - p.c) * r2 + (p.c - (tt - p.h)) * r1),
            np.where(tt < p.c, 2.0 * p.n * p.h * r1, 2.0 * p.n * p.h * r2))
        return np.sqrt(var)
    return _eval(t, fn)


def shark_fin(t, p: TheoryParams):
    """Systematic deviation m/s of the statistic; peaks in magnitude at c."""
    def fn(tt):
        return np.asarray(m_function(tt, p) / s_function(tt, p))
    return _eval(t, fn)


def classify_shark(p: TheoryParams) -> SharkShape:
    """Orientation of the m/s curve from the four sign/monotonicity cases."""
    if math.isclose(p.mu1, p.mu2, rel_tol=_REL_TOL):
        return SharkShape.FLAT
    if math.isclose(p.ratio1, p.ratio2, rel_tol=_REL_TOL):
        return SharkShape.HAT
    rate_up = p.mu2 < p.mu1          # m >= 0
    s_increasing = p.ratio2 > p.ratio1
    if rate_up:
        return SharkShape.WEST_FIN if s_increasing else SharkShape.EAST_FIN
    return SharkShape.WEST_FIN_INVERTED if s_increasing else SharkShape.EAST_FIN_INVERTED


# ---------------------------------------------------------------------------
# limits of the windowed estimators


def mu_ri_theory(t, p: TheoryParams):
    """Limit of the right-window life-time mean estimator.

    mu1 while the right window (t, t+h] sits left of c, mu2 once t has
    passed c, and in between the harmonic interpolation weighted by the
    expected event counts of the two segments.
    """
    def fn(tt):
        out = np.empty_like(tt)
        left = tt <= p.c - p.h
        right = tt > p.c
        mid = ~(left | right)
        out[left] = p.mu1
        out[right] = p.mu2
        tm = tt[mid]
        out[mid] = p.h * p.mu1 * p.mu2 / ((p.c - tm) * p.mu2 + (tm + p.h - p.c) * p.mu1)
        return out
    return _eval(t, fn)


def mu_le_theory(t, p: TheoryParams):
    """Limit of the left-window life-time mean estimator (mirror of mu_ri)."""
    def fn(tt):
        out = np.empty_like(tt)
        left = tt <= p.c
        right = tt >= p.c + p.h
        mid = ~(left | right)
        out[left] = p.mu1
        out[right] = p.mu2
        tm = tt[mid]
        out[mid] = p.h * p.mu1 * p.mu2 / ((p.c + p.h - tm) * p.mu2 + (tm - p.c) * p.mu1)
        return out
    return _eval(t, fn)


def _mixture_var(a, b, p: TheoryParams, sum_cross_term: bool):
    """Variance of the two-population life-time mixture with weights a, b.

    a weights the first law, b the second.  The cross term carries
    (mu1 - mu2)^2: it is the between-population variance of the mixture
    and the only reading that reduces to sigma^2 when the two laws share
    mu and sigma2.  With sum_cross_term=True the cross term uses
    (mu1 + mu2)^2 instead; that variant exists only so the verification
    lab can document that it disagrees with simulation.
    """
    tot = a + b
    if sum_cross_term:
        s1, s2 = math.sqrt(p.sigma1_sq), math.sqrt(p.sigma2_sq)
        return (a * b * ((s1 - s2) ** 2 + (p.mu1 + p.mu2) ** 2)
                + (a * s1 + b * s2) ** 2) / tot**2
    return ((a * p.sigma1_sq + b * p.sigma2_sq) / tot
            + a * b * (p.mu1 - p.mu2) ** 2 / tot**2)


def sigma2_ri_theory(t, p: TheoryParams, sum_cross_term: bool = False):
    """Limit of the right-window life-time variance estimator."""
    def fn(tt):
        out = np.empty_like(tt)
        left = tt <= p.c - p.h
        right = tt > p.c
        mid = ~(left | right)
        out[left] = p.sigma1_sq
        out[right] = p.sigma2_sq
        tm = tt[mid]
        a = (p.c - tm) * p.mu2
        b = (tm + p.h - p.c) * p.mu1
        out[mid] = _mixture_var(a, b, p, sum_cross_term)
        return out
    return _eval(t, fn)


def sigma2_le_theory(t, p: TheoryParams, sum_cross_term: bool = False):
    """Limit of the left-window life-time variance estimator."""
    def fn(tt):
        out = np.empty_like(tt)
        left = tt <= p.c
        right = tt >= p.c + p.h
        mid = ~(left | right)
        out[left] = p.sigma1_sq
        out[right] = p.sigma2_sq
        tm = tt[mid]
        a = (p.c + p.h - tm) * p.mu2
        b = (tm - p.c) * p.mu1
        out[mid] = _mixture_var(a, b, p, sum_cross_term)
        return out
    return _eval(t, fn)


def s_tilde(t, p: TheoryParams):
    """Deterministic limit of the estimated scaling s_hat."""
    def fn(tt):
        return np.sqrt((sigma2_ri_theory(tt, p) / mu_ri_theory(tt, p) ** 3
                        + sigma2_le_theory(tt, p) / mu_le_theory(tt, p) ** 3)
                       * p.n * p.h)
    return _eval(t, fn)


def distortion(t, p: TheoryParams):
    """Multiplicative estimation error s/s_tilde near the change point.

    Continuous, identically 1 outside (c-h, c+h) and exactly 1 at c,
    where the two window halves each see a single population.
    """
    p1 = p.at_scale(1)
    def fn(tt):
        return np.asarray(s_function(tt, p1) / s_tilde(tt, p1))
    return _eval(t, fn)


# ---------------------------------------------------------------------------
# detection probability


def normal_cdf(x):
    """Standard normal distribution function (rational erf approximation)."""
    out = ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(x) == 0 else out


def detection_bound(Q: float, p: TheoryParams) -> float:
    """Lower bound on the probability that max_t of the statistic exceeds Q.

    At the change point the statistic is asymptotically normal with unit
    variance and mean |1/mu2 - 1/mu1| / sqrt(r2 + r1) * sqrt(nh), so the
    exceedance probability at c alone already bounds the maximum.
    """
    if Q < 0:
        raise ValueError(f"threshold must be non-negative, got {Q}")
    shift = (abs(1.0 / p.mu2 - 1.0 / p.mu1)
             / math.sqrt(p.ratio2 + p.ratio1) * math.sqrt(p.n * p.h))
    return float(1.0 - normal_cdf(Q - shift))


# ---------------------------------------------------------------------------
# Gaussian limit process


def _brownian_paths(rng: np.random.Generator, n_paths: int, n_steps: int,
                    step: float) -> np.ndarray:
    """(n_paths, n_steps+1) standard Brownian paths sampled every `step`."""
    incs = rng.standard_normal((n_paths, n_steps)) * math.sqrt(step)
    w = np.empty((n_paths, n_steps + 1))
    w[:, 0] = 0.0
    np.cumsum(incs, axis=1, out=w[:, 1:])
    return w


def simulate_L_paths(cfg: WindowConfig, p: TheoryParams, seed: int,
                     n_paths: int, stream: Iterable[int] = ()) -> tuple:
    """Discretised sample paths of the Gaussian limit process.

    Returns (grid, values) where values has shape (n_paths, len(grid)).
    One Brownian path per replicate is sampled on the full lattice over
    [0, T] with independent N(0, grid_step) increments; window offsets
    and the change point are resolved by lattice index arithmetic, which
    is why h and c must be multiples of the grid step.
    """
    if abs(p.T - cfg.T) > 1e-9 * max(1.0, cfg.T):
        raise ConfigurationError(f"params horizon {p.T} != grid horizon {cfg.T}")
    delta = cfg.grid_step
    jg = cfg.grid_indices(p.h)
    kh = cfg.lattice_index(p.h, "window size")
    kc = cfg.lattice_index(p.c, "change point")
    grid = jg * delta

    rng = substream(seed, *stream)
    w = _brownian_paths(rng, n_paths, cfg.lattice_size(), delta)
    wp = w[:, jg + kh]
    wt = w[:, jg]
    wm = w[:, jg - kh]

    mid_left = (jg >= kc - kh) & (jg <= kc)
    mid_right = (jg > kc) & (jg <= kc + kh)
    outer = ~(mid_left | mid_right)

    values = np.empty((n_paths, jg.size))
    values[:, outer] = ((wp[:, outer] - 2.0 * wt[:, outer] + wm[:, outer])
                        / math.sqrt(2.0 * p.h))
    if mid_left.any() or mid_right.any():
        wc = w[:, kc][:, None]
        g1 = math.sqrt(p.ratio1)
        g2 = math.sqrt(p.ratio2)
        p1 = p.at_scale(1)
        if mid_left.any():
            s1 = s_function(grid[mid_left], p1)
            values[:, mid_left] = (
                g2 * (wp[:, mid_left] - wc)
                + g1 * (wc - 2.0 * wt[:, mid_left] + wm[:, mid_left])) / s1
        if mid_right.any():
            s1 = s_function(grid[mid_right], p1)
            values[:, mid_right] = (
                g2 * (wp[:, mid_right] - 2.0 * wt[:, mid_right] + wc)
                - g1 * (wc - wm[:, mid_right])) / s1
    return grid, values


def simulate_L(cfg: WindowConfig, p: TheoryParams, seed: int,
               stream: Iterable[int] = ()) -> StatisticSeries:
    """One discretised path of the Gaussian limit process on the grid."""
    grid, values = simulate_L_paths(cfg, p, seed, 1, stream=stream)
    return StatisticSeries(grid=grid, values=values[0],
                           valid=np.ones(grid.size, dtype=bool),
                           h=p.h, n=1, grid_step=cfg.grid_step)
