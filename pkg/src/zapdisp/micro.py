"""Deterministic solver for the microscale jump-plus-remix equation

    u_t = [ (1/v) int_{-inf}^x exp(-(x-xi)/v) u(xi, y) dxi - u ] + [ mean_y(u) - u ]

on an x-grid times Gauss-Legendre y-nodes.  The upstream exponential
convolution of the piecewise-linear interpolant of u is evaluated exactly by
a one-pass recursion per y-node (O(Nx)), with a closed-form periodic wrap.
General one-sided jump densities go through a slower direct-convolution path.
Time stepping is classical RK4.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.signal import lfilter

from .errors import InvalidArgument, NumericalError, StabilityError, UnsupportedKernel
from .kernel import JumpKernel
from .polynomial import YPolynomial
from .profile import CrossSection, cross_mean, eval_profile

log = logging.getLogger(__name__)

MAX_DT = 0.1
BOUNDARIES = ("periodic", "inflow-zero")


@dataclass(frozen=True, eq=False)
class MicroGrid:
    L: float
    nx: int
    cs: CrossSection
    boundary: str = "periodic"

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidArgument(f"domain length must be positive, got {self.L!r}")
        if int(self.nx) != self.nx or self.nx < 8:
            raise InvalidArgument(f"nx must be an integer >= 8, got {self.nx!r}")
        if self.boundary not in BOUNDARIES:
            raise InvalidArgument(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def h(self) -> float:
        return self.L / self.nx

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.nx)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.cs.n_nodes)


@dataclass(eq=False)
class MicroField:
    values: np.ndarray  # (nx, n_nodes)
    t: float = 0.0

    def cross_mean(self, cs: CrossSection) -> np.ndarray:
        return cross_mean(self.values, cs)


def mass(u, grid: MicroGrid) -> float:
    """Integral of u over x and y: 2 h sum_i mean_y u(x_i, .)."""
    values = u.values if isinstance(u, MicroField) else np.asarray(u)
    return float(2.0 * grid.h * np.sum(cross_mean(values, grid.cs)))


# -- exponential-integrator weights ------------------------------------------------

_SERIES_TERMS = 24


def _first_moment_integral(a: np.ndarray) -> np.ndarray:
    """int_0^1 s exp(-a s) ds, stable for all a >= 0."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = a < 1.0
    if np.any(small):
        b = a[small]
        acc = np.zeros_like(b)
        term = np.ones_like(b)  # (-b)^k / k!
        for k in range(_SERIES_TERMS):
            acc += term / (k + 2)
            term = term * (-b) / (k + 1)
        out[small] = acc
    big = ~small
    if np.any(big):
        b = a[big]
        out[big] = (-np.expm1(-b) - b * np.exp(-b)) / (b * b)
    return out


def exp_weights(h: float, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alpha, beta, gamma) for C_i = alpha C_{i-1} + beta u_{i-1} + gamma u_i.

    beta, gamma integrate the two hat functions of one cell against
    exp(-(x_i - xi)/v); beta + gamma = v (1 - alpha).
    """
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise InvalidArgument("jump mean v must be positive")
    a = h / v
    alpha = np.exp(-a)
    zeroth = np.where(a < 1e-300, 1.0, -np.expm1(-a) / np.where(a < 1e-300, 1.0, a))
    first = _first_moment_integral(a)
    beta = h * first
    gamma = h * (zeroth - first)
    return alpha, beta, gamma


@dataclass(frozen=True, eq=False)
class ConvState:
    v: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    powers: np.ndarray  # (nx + 1, n_nodes): alpha^i
    wrap: np.ndarray  # 1 - exp(-L/v)

    @classmethod
    def build(cls, v, grid: MicroGrid) -> "ConvState":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        alpha, beta, gamma = exp_weights(grid.h, v)
        i = np.arange(grid.nx + 1)[:, None]
        powers = np.exp(-(i * grid.h) / v[None, :])
        return cls(v, alpha, beta, gamma, powers, -np.expm1(-grid.L / v))


def _convolve_row(u_row: np.ndarray, j: int, state: ConvState, boundary: str) -> np.ndarray:
    nx = u_row.shape[0]
    alpha, beta, gamma = state.alpha[j], state.beta[j], state.gamma[j]
    pw = state.powers[:, j]
    ext = np.append(u_row, u_row[0]) if boundary == "periodic" else u_row
    y = lfilter([gamma, beta], [1.0, -alpha], ext)
    # lfilter starts from y_0 = gamma u_0; remove that seed so the pass starts at C_0 = 0
    c = y - gamma * u_row[0] * pw[:ext.shape[0]]
    if boundary == "periodic":
        c0 = c[nx] / state.wrap[j]
        c = c[:nx] + c0 * pw[:nx]
    return c


def exp_convolve(u_row, v_j: float, grid: MicroGrid) -> np.ndarray:
    """C(x_i) = int_{-inf}^{x_i} exp(-(x_i - xi)/v_j) u(xi) dxi for one y-node.

    u is the piecewise-linear interpolant of ``u_row``; periodic grids wrap it
    over all upstream periods, inflow-zero grids take u = 0 upstream of x_0.
    """
    if not v_j > 0:
        raise InvalidArgument(f"jump mean must be positive, got {v_j!r}")
    u_row = np.asarray(u_row, dtype=float)
    if u_row.shape != (grid.nx,):
        raise InvalidArgument("row length must equal nx")
    state = ConvState.build([v_j], grid)
    return _convolve_row(u_row, 0, state, grid.boundary)


# -- general kernels: direct convolution with hat-function weights ------------------

def hat_weights(density: Callable[[np.ndarray], np.ndarray], grid: MicroGrid,
                tail_tol: float = 1e-16, max_lags: int | None = None):
    """Lag weights K_k = int p(s) hat(s - k h) ds and right-half weights.

    Returns (K, K_right) where K_right[k] only integrates the half of the hat
    with s <= k h (needed at the inflow node).
    """
    h = grid.h
    f = lambda s: float(density(np.asarray(s)))
    max_lags = max_lags or 64 * grid.nx
    K, K_right = [], []
    k = 0
    while True:
        left = 0.0
        if k > 0:
            left, _ = integrate.quad(lambda s: f(s) * (1.0 - (k * h - s) / h),
                                     (k - 1) * h, k * h, epsabs=1e-17, epsrel=1e-13)
        right, _ = integrate.quad(lambda s: f(s) * (1.0 - (s - k * h) / h),
                                  k * h, (k + 1) * h, epsabs=1e-17, epsrel=1e-13)
        K.append(left + right)
        K_right.append(left)
        k += 1
        if k >= max_lags:
            break
        tail, _ = integrate.quad(f, k * h, np.inf, epsabs=1e-18, epsrel=1e-10)
        if tail < tail_tol:
            break
    return np.array(K), np.array(K_right)


class MicroSolver:
    """Right-hand side and RK4 integrator for one grid and kernel."""

    def __init__(self, grid: MicroGrid, kernel: JumpKernel, threads: int = 1):
        self.grid = grid
        self.kernel = kernel
        self.threads = max(1, int(threads))
        cs = grid.cs
        if kernel.kind == "exponential":
            self.v = eval_profile(kernel.profile, cs)
            self.state = ConvState.build(self.v, grid)
            self._slow = None
        else:
            if kernel.density is None:
                raise UnsupportedKernel(
                    "general kernels need a jump density for the micro solver")
            self.state = None
            self._slow = [self._slow_weights(j) for j in range(cs.n_nodes)]

    def _slow_weights(self, j: int):
        K, K_right = hat_weights(lambda s: self.kernel.jump_density(s, j, self.grid.cs), self.grid)
        nx = self.grid.nx
        if self.grid.boundary == "periodic":
            # fold lags beyond one period back onto the ring
            pad = (-len(K)) % nx
            K = np.concatenate([K, np.zeros(pad)]).reshape(-1, nx).sum(axis=0)
        return K, K_right

    def _jump_column(self, u: np.ndarray, j: int) -> np.ndarray:
        row = u[:, j]
        if self._slow is None:
            return self.state_convolve(row, j) / self.v[j] - row
        K, K_right = self._slow[j]
        nx = self.grid.nx
        if self.grid.boundary == "periodic":
            ext = np.concatenate([row[1:], row])
            c = np.convolve(ext, K, mode="valid")[:nx]
        else:
            Kt = np.zeros(nx)
            m = min(nx, len(K))
            Kt[:m] = K[:m]
            c = np.convolve(row, Kt)[:nx]
            # leftmost node only contributes its inner half-hat
            Kr = np.zeros(nx)
            m = min(nx, len(K_right))
            Kr[:m] = K_right[:m]
            c = c - (Kt - Kr) * row[0]
        return c - row

    def state_convolve(self, row: np.ndarray, j: int) -> np.ndarray:
        return _convolve_row(row, j, self.state, self.grid.boundary)

    def jump_term(self, u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        cols = range(u.shape[1])
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                for j, col in zip(cols, pool.map(lambda j: self._jump_column(u, j), cols)):
                    out[:, j] = col
        else:
            for j in cols:
                out[:, j] = self._jump_column(u, j)
        return out

    def rhs(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.grid.shape:
            raise InvalidArgument(f"field shape {u.shape} != grid shape {self.grid.shape}")
        mix = cross_mean(u, self.grid.cs)[:, None] - u
        return self.jump_term(u) + mix

    def step(self, u: np.ndarray, dt: float) -> np.ndarray:
        _check_dt(dt)
        k1 = self.rhs(u)
        k2 = self.rhs(u + 0.5 * dt * k1)
        k3 = self.rhs(u + 0.5 * dt * k2)
        k4 = self.rhs(u + dt * k3)
        return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def run(self, u0, dt: float = 0.05, t_end: float | None = None,
            output_times: Sequence[float] | None = None) -> "MicroRun":
        """Integrate from t = u0.t, returning snapshots at ``output_times``.

        Each inter-output interval is split into equal steps no longer than dt,
        so every requested time is hit exactly.
        """
        _check_dt(dt)
        field0 = u0 if isinstance(u0, MicroField) else MicroField(np.asarray(u0, float), 0.0)
        t0 = field0.t
        if output_times is None:
            if t_end is None:
                raise InvalidArgument("need t_end or output_times")
            output_times = [t_end]
        times = sorted(float(t) for t in output_times)
        if times and times[0] < t0 - 1e-12:
            raise InvalidArgument("output times precede the initial time")
        u = np.array(field0.values, dtype=float)
        t = t0
        snaps = []
        warnings: list[str] = []
        for target in times:
            span = target - t
            nsteps = max(0, math.ceil(span / dt - 1e-9))
            if nsteps:
                step_dt = span / nsteps
                for _ in range(nsteps):
                    u = self.step(u, step_dt)
                if not np.all(np.isfinite(u)):
                    raise NumericalError(f"non-finite values in micro solution before t={target}")
            t = target
            snaps.append(MicroField(u.copy(), t))
            if self.grid.boundary == "inflow-zero":
                msg = _edge_warning(u, self.grid)
                if msg:
                    warnings.append(f"t={t!r}: {msg}")
                    log.warning(msg)
        return MicroRun(self.grid, snaps, warnings)


def _check_dt(dt):
    if not (0 < dt <= MAX_DT):
        raise StabilityError(f"dt must lie in (0, {MAX_DT}], got {dt!r}", suggested_dt=0.05)


def _edge_warning(u: np.ndarray, grid: MicroGrid, rel: float = 1e-8) -> str | None:
    U = np.abs(cross_mean(u, grid.cs))
    total = U.sum()
    band = 10
    edge = U[:band].sum() + U[-band:].sum()
    if total > 0 and edge > rel * total:
        return f"mass within 10 cells of the boundary: fraction {edge / total:.3e}"
    return None


@dataclass(eq=False)
class MicroRun:
    grid: MicroGrid
    snapshots: list[MicroField]
    warnings: list[str] = field(default_factory=list)

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.snapshots]

    def at(self, t: float) -> MicroField:
        for s in self.snapshots:
            if abs(s.t - t) <= 1e-9 * max(1.0, abs(t)):
                return s
        raise InvalidArgument(f"no snapshot at t={t!r}")

    def summary(self) -> list[dict]:
        out = []
        for s in self.snapshots:
            U = cross_mean(s.values, self.grid.cs)
            out.append({"t": s.t, "mass": mass(s, self.grid),
                        "min": float(s.values.min()), "max": float(s.values.max()),
                        "U": [float(x) for x in U]})
        return out


# -- initial conditions --------------------------------------------------------------

IC_KINDS = ("gaussian", "step", "point", "table", "uniform")


def initial_condition(kind: str, grid: MicroGrid, *, x0: float | None = None,
                      sigma: float | None = None, table=None, y_shape=None,
                      normalize: bool = True) -> MicroField:
    """Build an initial density on the grid.

    ``y_shape`` (a YPolynomial, callable or node array) multiplies an
    otherwise y-uniform field.  Fields are scaled to unit mass unless
    ``normalize`` is false.
    """
    x = grid.x
    L = grid.L
    if x0 is None:
        x0 = 0.5 * L
    if kind == "gaussian":
        if sigma is None or not sigma > 0:
            raise InvalidArgument(f"gaussian sigma must be positive, got {sigma!r}")
        if grid.boundary == "periodic":
            d = (x - x0 + 0.5 * L) % L - 0.5 * L
            images = range(-3, 4)
            prof = sum(np.exp(-0.5 * ((d + m * L) / sigma) ** 2) for m in images)
        else:
            prof = np.exp(-0.5 * ((x - x0) / sigma) ** 2)
    elif kind == "step":
        if not 0 <= x0 <= L:
            raise InvalidArgument("step position outside the domain")
        prof = np.where(x < x0, 1.0, 0.0)
    elif kind == "point":
        i0 = int(round(x0 / grid.h)) % grid.nx
        prof = np.zeros(grid.nx)
        prof[i0] = 1.0
    elif kind == "uniform":
        prof = np.ones(grid.nx)
    elif kind == "table":
        values = np.asarray(table, dtype=float)
        if values.shape == (grid.nx,):
            values = np.repeat(values[:, None], grid.cs.n_nodes, axis=1)
        if values.shape != grid.shape:
            raise InvalidArgument(f"table shape {values.shape} does not match grid {grid.shape}")
        return _finish(values, grid, normalize)
    else:
        raise InvalidArgument(f"unknown initial condition {kind!r}; choose from {IC_KINDS}")
    ys = np.ones(grid.cs.n_nodes)
    if y_shape is not None:
        if isinstance(y_shape, YPolynomial) or callable(y_shape):
            ys = np.asarray(y_shape(grid.cs.nodes), dtype=float)
        else:
            ys = np.asarray(y_shape, dtype=float)
    return _finish(np.outer(prof, ys), grid, normalize)


def _finish(values: np.ndarray, grid: MicroGrid, normalize: bool) -> MicroField:
    if normalize:
        m = mass(values, grid)
        if m == 0:
            raise InvalidArgument("initial condition has zero mass")
        values = values / m
    return MicroField(values, 0.0)
