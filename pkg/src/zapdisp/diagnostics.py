"""Checks of the macroscale model against microscale truth.

The residual rho = U_t - A1 U_x - A2 U_xx is computed from a micro snapshot
alone: U is the cross-sectional mean, U_t the cross-mean of the exact
micro tendency, and x-derivatives are spectral on the periodic grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .macro import MacroField, wavenumbers
from .micro import MicroField, MicroGrid, MicroRun, MicroSolver
from .profile import cross_mean
from .slow_manifold import SlowManifold


def spectral_derivative(U: np.ndarray, L: float, order: int = 1) -> np.ndarray:
    n = U.shape[0]
    k = wavenumbers(n, L)
    mult = (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[n // 2] = 0.0
    return np.fft.ifft(np.fft.fft(U) * mult).real


@dataclass(eq=False)
class ResidualField:
    x: np.ndarray
    t: float
    rho: np.ndarray
    U: np.ndarray
    U_t: np.ndarray
    U_x: np.ndarray
    U_xx: np.ndarray
    A1: float
    A2: float

    @property
    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.rho)))

    @property
    def norm_2(self) -> float:
        h = self.x[1] - self.x[0]
        return float(np.sqrt(h * np.sum(self.rho ** 2)))

    @property
    def scale(self) -> float:
        """||U_t||_inf, the natural size against which rho is judged."""
        return float(np.max(np.abs(self.U_t)))

    def consistency(self) -> float:
        """max |U_t - A1 U_x - A2 U_xx - rho| (zero up to rounding)."""
        return float(np.max(np.abs(self.U_t - self.A1 * self.U_x - self.A2 * self.U_xx - self.rho)))

    def summary(self) -> dict:
        return {"t": self.t, "rho_inf": self.norm_inf, "rho_2": self.norm_2,
                "Ut_inf": self.scale,
                "relative": self.norm_inf / self.scale if self.scale > 0 else 0.0}


def _check_grid(snapshot: MicroField, grid: MicroGrid):
    if grid.boundary != "periodic":
        raise InvalidArgument("residual diagnostics need a periodic grid")
    if np.shape(snapshot.values) != grid.shape:
        raise InvalidArgument(f"snapshot shape {np.shape(snapshot.values)} != grid {grid.shape}")


def _coefficients(sm: SlowManifold) -> tuple[float, float]:
    if sm.order < 2:
        raise InvalidArgument("residual needs an order-2 (or higher) slow manifold")
    return float(sm.A[0]), float(sm.A[1])


def defect_residual(snapshot: MicroField, sm: SlowManifold, solver: MicroSolver) -> ResidualField:
    grid = solver.grid
    _check_grid(snapshot, grid)
    A1, A2 = _coefficients(sm)
    u = np.asarray(snapshot.values, dtype=float)
    U = cross_mean(u, grid.cs)
    # the remix term has zero cross-mean, so only the jump part moves U
    U_t = cross_mean(solver.jump_term(u), grid.cs)
    U_x = spectral_derivative(U, grid.L, 1)
    U_xx = spectral_derivative(U, grid.L, 2)
    rho = U_t - A1 * U_x - A2 * U_xx
    return ResidualField(grid.x, snapshot.t, rho, U, U_t, U_x, U_xx, A1, A2)


@dataclass(frozen=True)
class EmergenceReport:
    rate: float
    amplitude: float
    window: tuple[float, float]
    r_squared: float
    on_manifold: bool
    n_points: int
    note: str = ""


def off_manifold_norm(snapshot: MicroField, grid: MicroGrid) -> float:
    u = np.asarray(snapshot.values)
    return float(np.max(np.abs(u - cross_mean(u, grid.cs)[:, None])))


def transient_decay(run: MicroRun, floor: float = 1e-10) -> EmergenceReport:
    """Fit e(t) = ||u - mean_y u||_inf ~ a exp(-rate t) for an x-uniform start."""
    grid = run.grid
    first = np.asarray(run.snapshots[0].values)
    scale = max(1.0, float(np.max(np.abs(first))))
    if np.max(np.abs(first - first[0:1, :])) > 1e-13 * scale:
        raise InvalidArgument("transient_decay needs an initial condition uniform in x")
    t = np.array(run.times)
    e = np.array([off_manifold_norm(s, grid) for s in run.snapshots])
    if e[0] <= floor * scale:
        return EmergenceReport(float("nan"), float(e[0]), (float(t[0]), float(t[0])), 1.0,
                               True, 1, "already on manifold")
    keep = e > floor * scale
    if keep.sum() < 2:
        raise InvalidArgument("fewer than two snapshots above the noise floor")
    tt, le = t[keep], np.log(e[keep])
    slope, intercept = np.polyfit(tt, le, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return EmergenceReport(float(-slope), float(np.exp(intercept)), (float(tt[0]), float(tt[-1])),
                           r2, False, int(keep.sum()))


@dataclass(eq=False)
class ShapeReport:
    t: float
    relative: float
    deviation: np.ndarray  # (nx, n_nodes)
    per_x: np.ndarray
    reference: float
    pre_emergent: bool


def quasistationary_field(U: np.ndarray, sm: SlowManifold, L: float) -> np.ndarray:
    """U + sum_n V_n(y) d^n U/dx^n on the node grid."""
    out = np.repeat(U[:, None], sm.cs.n_nodes, axis=1) * sm.V_nodes(0)[None, :]
    for n in range(1, sm.order + 1):
        out += spectral_derivative(U, L, n)[:, None] * sm.V_nodes(n)[None, :]
    return out


def shape_check(snapshot: MicroField, sm: SlowManifold, grid: MicroGrid,
                tol: float = 0.1, floor: float = 1e-300) -> ShapeReport:
    _check_grid(snapshot, grid)
    if sm.order < 2 or sm.cs.n_nodes != grid.cs.n_nodes:
        raise InvalidArgument("shape check needs an order-2 slow manifold on the grid's nodes")
    u = np.asarray(snapshot.values)
    U = cross_mean(u, grid.cs)
    U_x = spectral_derivative(U, grid.L, 1)
    U_xx = spectral_derivative(U, grid.L, 2)
    t1 = U_x[:, None] * sm.V_nodes(1)[None, :]
    t2 = U_xx[:, None] * sm.V_nodes(2)[None, :]
    dev = u - U[:, None] - t1 - t2
    ref = max(float(np.max(np.abs(t1))), float(np.max(np.abs(t2))), floor)
    rel = float(np.max(np.abs(dev))) / ref
    return ShapeReport(snapshot.t, rel, dev, np.max(np.abs(dev), axis=1), ref, rel > tol)


@dataclass(eq=False)
class ComparisonReport:
    times: list[float]
    rel_l2: list[float]
    rel_inf: list[float]

    @property
    def worst_l2(self) -> float:
        return max(self.rel_l2)

    @property
    def worst_inf(self) -> float:
        return max(self.rel_inf)

    def summary(self) -> dict:
        return {"times": self.times, "rel_l2": self.rel_l2, "rel_inf": self.rel_inf,
                "worst_l2": self.worst_l2, "worst_inf": self.worst_inf}


def compare_micro_macro(micro: MicroRun, macro: Sequence[MacroField], tol: float = 1e-12) -> ComparisonReport:
    grid = micro.grid
    if len(micro.snapshots) != len(macro):
        raise InvalidArgument("micro and macro series have different lengths")
    U_first = cross_mean(micro.snapshots[0].values, grid.cs)
    if abs(np.sum(U_first) - np.sum(macro[0].values)) > 1e-9 * max(1.0, np.sum(np.abs(U_first))):
        raise InvalidArgument("micro and macro series start from different masses")
    times, l2, linf = [], [], []
    for snap, mf in zip(micro.snapshots, macro):
        if abs(snap.t - mf.t) > tol * max(1.0, abs(snap.t)):
            raise InvalidArgument(f"time mismatch: micro t={snap.t}, macro t={mf.t}")
        if mf.values.shape[0] != grid.nx or abs(mf.L - grid.L) > 1e-12 * grid.L:
            raise InvalidArgument("micro and macro grids differ")
        U = cross_mean(snap.values, grid.cs)
        d = U - mf.values
        times.append(snap.t)
        l2.append(float(np.linalg.norm(d) / np.linalg.norm(mf.values)))
        linf.append(float(np.max(np.abs(d)) / np.max(np.abs(mf.values))))
    return ComparisonReport(times, l2, linf)
