"""Event-driven Monte Carlo of single particles in the channel.

Two independent unit-rate Poisson clocks act on each particle:

* zap: y is redrawn uniformly on (-1, 1);
* jump: x advances by an exponential distance with mean v(y).

Equivalently the next event arrives after an Exp(rate 2) wait and is a zap
or a jump with probability 1/2 each.  Randomness comes from per-particle
counter-based streams so results do not depend on batching or threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .profile import VelocityProfile
from .rng import ParticleStreams, to_unit_open

BATCH = 8192  # fixed batch size; part of the reproducibility contract


@dataclass(frozen=True)
class McConfig:
    n_particles: int = 100_000
    seed: int = 20240607
    t_outputs: tuple = tuple(float(t) for t in range(0, 201, 10))
    y0: float | None = None  # None: y ~ Uniform(-1, 1); else every particle starts here
    keep_y: bool = True

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise InvalidArgument("n_particles must be a positive integer")
        ts = list(self.t_outputs)
        if not ts:
            raise InvalidArgument("t_outputs must not be empty")
        if ts[0] < 0 or any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidArgument("t_outputs must be non-negative and ascending")
        if self.y0 is not None and not -1 < self.y0 < 1:
            raise InvalidArgument("fixed initial y must lie in (-1, 1)")


@dataclass(eq=False)
class McStats:
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    se_mean: np.ndarray
    se_var: np.ndarray
    n_particles: int
    seed: int
    x: np.ndarray = field(repr=False, default=None)  # (n_times, n_particles)
    y: np.ndarray | None = field(repr=False, default=None)

    def rows(self):
        for k in range(len(self.times)):
            yield (float(self.times[k]), float(self.mean[k]), float(self.var[k]),
                   float(self.se_mean[k]), float(self.se_var[k]))


def _simulate_batch(start: int, stop: int, cfg: McConfig, profile: VelocityProfile):
    streams = ParticleStreams(cfg.seed)
    times = np.asarray(cfg.t_outputs, dtype=float)
    n_out = len(times)
    n = stop - start
    idx = np.arange(start, stop, dtype=np.uint64)

    x_out = np.empty((n_out, n))
    y_out = np.empty((n_out, n)) if cfg.keep_y else None

    # event 0 of every stream seeds the initial cross-channel position
    w = streams.block(idx, 0)
    y = (-1.0 + 2.0 * to_unit_open(w[0], w[1])) if cfg.y0 is None else np.full(n, float(cfg.y0))
    x = np.zeros(n)
    t = np.zeros(n)
    nxt = np.zeros(n, dtype=np.int64)  # next output index per particle
    live = np.arange(n)
    event = 1
    while live.size:
        w0, w1, w2, w3 = streams.block(idx[live], event)
        t_new = t[live] - 0.5 * np.log(to_unit_open(w0, w1))
        # record the pre-event state at every output time passed by this wait
        while True:
            k = nxt[live]
            pending = k < n_out
            hit = pending.copy()
            hit[pending] = times[k[pending]] < t_new[pending]
            if not hit.any():
                break
            p = live[hit]
            x_out[nxt[p], p] = x[p]
            if y_out is not None:
                y_out[nxt[p], p] = y[p]
            nxt[p] += 1
        done = nxt[live] >= n_out
        keep = ~done
        live, t_new = live[keep], t_new[keep]
        w2, w3 = w2[keep], w3[keep]
        if not live.size:
            break
        # to_unit_open drops the low 6 bits of its second word, so bit 0 of w2 is a free coin
        mark = to_unit_open(w3, w2)
        jump = (w2 & np.uint32(1)).astype(bool)
        zap = ~jump
        pj, pz = live[jump], live[zap]
        x[pj] -= profile(y[pj]) * np.log(mark[jump])
        y[pz] = -1.0 + 2.0 * mark[zap]
        t[live] = t_new
        event += 1
    return x_out, y_out


def simulate(cfg: McConfig, profile: VelocityProfile, threads: int = 1) -> McStats:
    """Simulate ``cfg.n_particles`` trajectories from x = 0."""
    n = cfg.n_particles
    bounds = [(s, min(n, s + BATCH)) for s in range(0, n, BATCH)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda b: _simulate_batch(b[0], b[1], cfg, profile), bounds))
    else:
        parts = [_simulate_batch(a, b, cfg, profile) for a, b in bounds]
    x = np.concatenate([p[0] for p in parts], axis=1)
    y = np.concatenate([p[1] for p in parts], axis=1) if cfg.keep_y else None
    return summarize(np.asarray(cfg.t_outputs, dtype=float), x, y, cfg.seed)


def summarize(times: np.ndarray, x: np.ndarray, y=None, seed: int = 0) -> McStats:
    n = x.shape[1]
    mean = x.mean(axis=1)
    dev = x - mean[:, None]
    m2 = np.mean(dev ** 2, axis=1)
    m4 = np.mean(dev ** 4, axis=1)
    var = m2 * n / (n - 1) if n > 1 else np.zeros_like(m2)
    se_mean = np.sqrt(var / n)
    se_var = np.sqrt(np.maximum(m4 - m2 ** 2, 0.0) / n)
    return McStats(times, mean, var, se_mean, se_var, n, seed, x, y)


@dataclass(frozen=True)
class RateFit:
    drift: float
    se_drift: float
    var_rate: float
    se_var_rate: float
    t_window: tuple[float, float]


def fit_rates(stats: McStats, t_min: float | None = None, t_max: float | None = None) -> RateFit:
    """Least-squares slopes of mean and variance against time.

    Default window is the second half of the output times.  Standard errors
    treat each slope as a per-particle average (influence functions), which
    accounts for the strong correlation between output times.
    """
    t = stats.times
    if t_min is None:
        t_min = t[len(t) // 2]
    if t_max is None:
        t_max = t[-1]
    sel = (t >= t_min - 1e-12) & (t <= t_max + 1e-12)
    if sel.sum() < 2:
        raise InvalidArgument("need at least two output times in the fit window")
    ts = t[sel]
    c = (ts - ts.mean()) / np.sum((ts - ts.mean()) ** 2)
    xs = stats.x[sel]
    n = xs.shape[1]
    per_particle_drift = c @ xs
    drift = float(per_particle_drift.mean())
    se_drift = float(per_particle_drift.std(ddof=1) / np.sqrt(n))
    dev2 = (xs - xs.mean(axis=1, keepdims=True)) ** 2
    infl = c @ dev2
    var_rate = float(c @ stats.var[sel])
    se_var_rate = float(infl.std(ddof=1) / np.sqrt(n))
    return RateFit(drift, se_drift, var_rate, se_var_rate, (float(ts[0]), float(ts[-1])))


@dataclass(eq=False)
class Histogram:
    t: float
    x_edges: np.ndarray
    y_edges: np.ndarray
    density: np.ndarray  # (nx_bins, ny_bins), integrates to 1

    @property
    def x_marginal(self) -> np.ndarray:
        return self.density @ np.diff(self.y_edges)

    @property
    def y_marginal(self) -> np.ndarray:
        return np.diff(self.x_edges) @ self.density


def histogram(stats: McStats, t: float, x_bins=50, y_bins=20) -> Histogram:
    matches = np.flatnonzero(np.abs(stats.times - t) <= 1e-9 * max(1.0, abs(t)))
    if not matches.size:
        raise InvalidArgument(f"t={t!r} is not one of the output times")
    if stats.y is None:
        raise InvalidArgument("ensemble was simulated without keeping y")
    k = int(matches[0])
    x, y = stats.x[k], stats.y[k]
    if np.isscalar(x_bins):
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            hi = lo + 1.0
        x_bins = np.linspace(lo, hi, int(x_bins) + 1)
    if np.isscalar(y_bins):
        y_bins = np.linspace(-1.0, 1.0, int(y_bins) + 1)
    counts, xe, ye = np.histogram2d(x, y, bins=[x_bins, y_bins])
    area = np.outer(np.diff(xe), np.diff(ye))
    return Histogram(float(stats.times[k]), xe, ye, counts / (counts.sum() * area))


def write_stats_csv(stats: McStats, path, header_lines: Sequence[str] = ()):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t,mean,var,se_mean,se_var\n")
        for row in stats.rows():
            fh.write(",".join(repr(v) for v in row) + "\n")
