"""Renewal point processes with an optional rate/variance change point.

A point process on the positive line is stored as its increasing event
times 0 < S_1 < S_2 < ... <= horizon.  Equivalent views are the life
times xi_j = S_j - S_{j-1} (with xi_1 = S_1) and the counting process
N_t = #{j : S_j <= t}.  A renewal process has i.i.d. positive life times
with mean mu and variance sigma2 > 0; its rate is 1/mu.

A change-point model glues two independent renewal processes: events on
(0, n*c] come from the first process, events on (n*c, n*T] from an
independent second process restricted to that interval.  The integer
scale n stretches horizon and change point together and is what the
convergence checks in `lab` vary.

All simulation is driven by a single master seed plus integer stream
labels, so every replicate and every segment of a compound simulation
is independently reproducible and safe to run in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Optional

import numpy as np

__all__ = [
    "ConfigurationError",
    "RenewalSpec",
    "EventSequence",
    "ChangePointModel",
    "WindowConfig",
    "substream",
    "register_sampler",
    "simulate_renewal",
    "simulate_compound",
    "write_event_file",
    "read_event_file",
]

# Relative tolerance used whenever a real value must sit on the grid lattice.
_ALIGN_RTOL = 1e-9


class ConfigurationError(ValueError):
    """Inconsistent run configuration (grid misalignment, table mismatch...)."""


def substream(seed: int, *labels: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *labels).

    Distinct label tuples yield statistically independent streams, which
    keeps parallel Monte Carlo replicates and the two segments of a
    compound simulation individually reproducible.
    """
    return np.random.default_rng([int(seed), *[int(x) for x in labels]])


# ---------------------------------------------------------------------------
# life-time distributions


_SAMPLERS: dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {}


def register_sampler(name: str, fn: Callable[[np.random.Generator, int], np.ndarray]) -> None:
    """Register a custom life-time sampler usable via RenewalSpec.generic."""
    _SAMPLERS[name] = fn


@dataclass(frozen=True)
class RenewalSpec:
    """Life-time law of a renewal process.

    mu and sigma2 are the mean and variance of one life time; for the
    gamma family (shape p, rate lam) they are p/lam and p/lam**2.
    """

    family: str  # "gamma" | "exponential" | "generic"
    mu: float
    sigma2: float
    shape: Optional[float] = None
    rate: Optional[float] = None
    sampler_id: Optional[str] = None

    def __post_init__(self):
        if self.family not in ("gamma", "exponential", "generic"):
            raise ValueError(f"unknown life-time family {self.family!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"life-time mean must be positive, got {self.mu}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"life-time variance must be positive, got {self.sigma2}")
        if self.family == "gamma":
            if not (self.shape and self.rate and self.shape > 0 and self.rate > 0):
                raise ValueError("gamma life times need positive shape and rate")
            if not (math.isclose(self.mu, self.shape / self.rate, rel_tol=1e-12)
                    and math.isclose(self.sigma2, self.shape / self.rate**2, rel_tol=1e-12)):
                raise ValueError("gamma moments must equal shape/rate and shape/rate**2")
        if self.family == "exponential" and not (self.rate and self.rate > 0):
            raise ValueError("exponential life times need a positive rate")
        if self.family == "generic" and not self.sampler_id:
            raise ValueError("generic life times need a registered sampler_id")

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "RenewalSpec":
        if shape <= 0 or rate <= 0:
            raise ValueError(f"gamma shape and rate must be positive, got ({shape}, {rate})")
        return cls("gamma", shape / rate, shape / rate**2, shape=shape, rate=rate)

    @classmethod
    def exponential(cls, rate: float) -> "RenewalSpec":
        if rate <= 0:
            raise ValueError(f"exponential rate must be positive, got {rate}")
        return cls("exponential", 1.0 / rate, 1.0 / rate**2, rate=rate)

    @classmethod
    def generic(cls, sampler_id: str, mu: float, sigma2: float) -> "RenewalSpec":
        if sampler_id not in _SAMPLERS:
            raise ValueError(f"no sampler registered under {sampler_id!r}")
        return cls("generic", mu, sigma2, sampler_id=sampler_id)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` i.i.d. life times."""
        if self.family == "gamma":
            out = rng.gamma(self.shape, 1.0 / self.rate, size)
        elif self.family == "exponential":
            out = rng.exponential(1.0 / self.rate, size)
        else:
            out = np.asarray(_SAMPLERS[self.sampler_id](rng, size), dtype=float)
        # exact zeros are measure-zero artifacts of float underflow; redraw them
        bad = np.flatnonzero(out <= 0.0)
        while bad.size:
            out[bad] = self.draw(rng, bad.size)
            bad = bad[out[bad] <= 0.0]
        return out

    def to_dict(self) -> dict:
        d = {"family": self.family, "mu": self.mu, "sigma2": self.sigma2}
        if self.shape is not None:
            d["shape"] = self.shape
        if self.rate is not None:
            d["rate"] = self.rate
        if self.sampler_id is not None:
            d["sampler_id"] = self.sampler_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RenewalSpec":
        return cls(d["family"], d["mu"], d["sigma2"], shape=d.get("shape"),
                   rate=d.get("rate"), sampler_id=d.get("sampler_id"))


# ---------------------------------------------------------------------------
# event sequences


def _enforce_strict_increase(times: np.ndarray) -> np.ndarray:
    """Bump float-rounding ties up by one ulp so times strictly increase.

    Consecutive events closer than one ulp of the running sum collapse to
    equal floats when life times are accumulated.  The bump moves an event
    by <= a few ulp, which no windowed count at O(1) resolution can see,
    and it preserves the event count, unlike dropping the tie.
    """
    if times.size < 2:
        return times
    while True:
        bad = np.flatnonzero(np.diff(times) <= 0.0)
        if bad.size == 0:
            return times
        times = times.copy() if not times.flags.writeable else times
        for i in bad:
            times[i + 1] = np.nextafter(times[i], np.inf)


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Strictly increasing event times on (0, horizon]."""

    events: np.ndarray
    horizon: float

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float)
        if ev.ndim != 1:
            raise ValueError("event times must form a one-dimensional sequence")
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise ValueError(f"horizon must be finite and non-negative, got {self.horizon}")
        if ev.size:
            if not np.all(np.isfinite(ev)):
                raise ValueError("event times must be finite")
            if ev[0] <= 0.0:
                raise ValueError(f"event times must be positive, got {ev[0]}")
            if ev[-1] > self.horizon:
                raise ValueError(f"event time {ev[-1]} exceeds horizon {self.horizon}")
            steps = np.diff(ev)
            if np.any(steps <= 0.0):
                i = int(np.flatnonzero(steps <= 0.0)[0]) + 1
                raise ValueError(
                    f"event times must strictly increase; duplicate or decreasing "
                    f"time {ev[i]} at index {i}")
        ev.flags.writeable = False
        object.__setattr__(self, "events", ev)

    def __len__(self) -> int:
        return int(self.events.size)

    @cached_property
    def _life(self) -> np.ndarray:
        out = np.diff(self.events, prepend=0.0)
        out.flags.writeable = False
        return out

    def life_times(self) -> np.ndarray:
        """Life times xi_j = S_j - S_{j-1} with xi_1 = S_1."""
        return self._life

    def count_at(self, t: float) -> int:
        """N_t, the number of events in (0, t]."""
        return int(np.searchsorted(self.events, t, side="right"))

    def count_in(self, a: float, b: float) -> int:
        """Number of events in the half-open interval (a, b]."""
        if a > b:
            raise ValueError(f"need a <= b, got ({a}, {b})")
        return self.count_at(b) - self.count_at(a)


# ---------------------------------------------------------------------------
# models and simulation


@dataclass(frozen=True)
class ChangePointModel:
    """Two renewal laws glued at time n*c inside the horizon n*T.

    c == T is allowed and means the second law never takes effect; the
    compound simulation then reproduces the plain phi1 simulation on the
    same stream exactly.
    """

    phi1: RenewalSpec
    phi2: RenewalSpec
    c: float
    T: float
    n: int = 1

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not (0 < self.c <= self.T):
            raise ValueError(f"change point must lie in (0, T], got c={self.c}, T={self.T}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"scale n must be a positive integer, got {self.n}")

    def with_scale(self, n: int) -> "ChangePointModel":
        return ChangePointModel(self.phi1, self.phi2, self.c, self.T, int(n))

    def to_dict(self) -> dict:
        return {"phi1": self.phi1.to_dict(), "phi2": self.phi2.to_dict(),
                "c": self.c, "T": self.T, "n": int(self.n)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChangePointModel":
        return cls(RenewalSpec.from_dict(d["phi1"]), RenewalSpec.from_dict(d["phi2"]),
                   d["c"], d["T"], int(d.get("n", 1)))


def simulate_renewal(spec: RenewalSpec, horizon: float, seed: int,
                     stream: Iterable[int] = ()) -> EventSequence:
    """Simulate a renewal process on (0, horizon].

    Event times are cumulative sums of i.i.d. life times drawn from the
    stream (seed, *stream), truncated at the horizon.  Deterministic for
    fixed (spec, horizon, seed, stream).
    """
    if horizon < 0 or not math.isfinite(horizon):
        raise ValueError(f"horizon must be finite and non-negative, got {horizon}")
    rng = substream(seed, *stream)
    if horizon == 0:
        return EventSequence(np.empty(0), 0.0)
    parts = []
    total = 0.0
    chunk = max(int(horizon / spec.mu * 1.25) + 16, 16)
    while total <= horizon:
        xi = spec.draw(rng, chunk)
        parts.append(xi)
        total += float(xi.sum())
        chunk = max(chunk // 4, 1024)
    times = np.cumsum(np.concatenate(parts))
    times = _enforce_strict_increase(times)
    return EventSequence(times[times <= horizon], horizon)


def simulate_compound(model: ChangePointModel, seed: int,
                      stream: Iterable[int] = ()) -> EventSequence:
    """Simulate a change-point model on (0, n*T].

    The first segment is a phi1 process on (0, n*c]; the second is an
    independent phi2 process on (0, n*T] restricted to (n*c, n*T].  An
    event landing exactly on n*c belongs to the first segment.  The two
    segments use the sub-streams (*stream, 1) and (*stream, 2).
    """
    nc = model.n * model.c
    nT = model.n * model.T
    left = simulate_renewal(model.phi1, nc, seed, stream=(*stream, 1))
    right = simulate_renewal(model.phi2, nT, seed, stream=(*stream, 2))
    times = np.concatenate([left.events, right.events[right.events > nc]])
    return EventSequence(_enforce_strict_increase(times), nT)


# ---------------------------------------------------------------------------
# analysis grids


def _align_ratio(x: float, step: float, what: str) -> int:
    """x/step as an exact integer, or raise ConfigurationError."""
    ratio = x / step
    k = round(ratio)
    if abs(ratio - k) > _ALIGN_RTOL * max(1.0, abs(ratio)):
        raise ConfigurationError(
            f"{what} {x} is not a multiple of grid step {step}")
    return int(k)


@dataclass(frozen=True)
class WindowConfig:
    """Analysis grid: window sizes h and a uniform step over [h, T-h].

    Every grid node sits on the lattice {j * grid_step}; each window size
    must be an integral number of steps so that t - h, t and t + h are
    all lattice nodes.  That is what lets the limit-process simulation
    resolve the window offsets by pure index arithmetic.
    """

    T: float
    h_set: tuple
    grid_step: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not (self.grid_step > 0 and math.isfinite(self.grid_step)):
            raise ValueError(f"grid step must be positive, got {self.grid_step}")
        hs = tuple(sorted(float(h) for h in (
            self.h_set if isinstance(self.h_set, (tuple, list, set, frozenset, np.ndarray))
            else (self.h_set,))))
        if not hs:
            raise ValueError("h_set must not be empty")
        if len(set(hs)) != len(hs):
            raise ValueError(f"window sizes must be distinct, got {hs}")
        for h in hs:
            if not (0 < h <= self.T / 2):
                raise ValueError(f"window size must lie in (0, T/2], got h={h}, T={self.T}")
            _align_ratio(h, self.grid_step, "window size")
        object.__setattr__(self, "h_set", hs)

    def lattice_size(self) -> int:
        """Largest lattice index j with j * grid_step <= T."""
        return int(math.floor(self.T / self.grid_step + _ALIGN_RTOL))

    def grid_indices(self, h: float) -> np.ndarray:
        """Lattice indices of the analysis region [h, T-h] for window h."""
        if not (0 < h <= self.T / 2):
            raise ValueError(f"window size must lie in (0, T/2], got h={h}, T={self.T}")
        j0 = _align_ratio(h, self.grid_step, "window size")
        j1 = int(math.floor((self.T - h) / self.grid_step + _ALIGN_RTOL))
        return np.arange(j0, j1 + 1)

    def grid(self, h: float) -> np.ndarray:
        """Grid nodes covering the analysis region [h, T-h] for window h."""
        return self.grid_indices(h) * self.grid_step

    def snap(self, t: float) -> float:
        """Nearest lattice node; attach change points to the grid with this."""
        return round(t / self.grid_step) * self.grid_step

    def lattice_index(self, t: float, what: str = "time") -> int:
        """Lattice index of t; raises ConfigurationError if t is off-lattice."""
        return _align_ratio(t, self.grid_step, what)


# ---------------------------------------------------------------------------
# event file I/O

# Format: '#'-prefixed comment lines, a '# horizon=<value>' header, then one
# ascending decimal event time per line.


def write_event_file(path, seq: EventSequence) -> None:
    with open(path, "w") as fh:
        fh.write(f"# horizon={seq.horizon!r}\n")
        for t in seq.events:
            fh.write(f"{float(t)!r}\n")


def read_event_file(path) -> EventSequence:
    horizon = None
    times = []
    prev = 0.0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("horizon="):
                    try:
                        horizon = float(body.split("=", 1)[1])
                    except ValueError:
                        raise ValueError(f"{path}: line {lineno}: bad horizon header {line!r}")
                continue
            try:
                t = float(line)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: not a number: {line!r}")
            if t <= prev:
                raise ValueError(
                    f"{path}: line {lineno}: event time {t} does not increase past {prev}")
            times.append(t)
            prev = t
    if horizon is None:
        raise ValueError(f"{path}: missing '# horizon=' header")
    return EventSequence(np.asarray(times), horizon)
