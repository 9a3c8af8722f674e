"""Periodic solvers for U_t = A1 U_x + A2 U_xx.

The spectral propagator is exact for every discrete Fourier mode; the
finite-difference solver (central differences, RK4) only cross-checks it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllPosed, InvalidArgument, NumericalError, StabilityError


@dataclass(eq=False)
class MacroField:
    values: np.ndarray
    t: float
    L: float

    @property
    def x(self) -> np.ndarray:
        n = self.values.shape[0]
        return (self.L / n) * np.arange(n)


def wavenumbers(n: int, L: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)


def solve_spectral(A1: float, A2: float, U0: MacroField, t: float) -> MacroField:
    if A2 < 0:
        raise IllPosed(f"A2 = {A2!r} < 0 makes the macroscale problem ill-posed")
    if t < 0:
        raise InvalidArgument("cannot propagate backwards in time")
    u = np.asarray(U0.values, dtype=float)
    n = u.shape[0]
    k = wavenumbers(n, U0.L)
    growth = np.exp(-k * k * A2 * t)
    phase = np.exp(1j * k * A1 * t)
    if n % 2 == 0:
        # the Nyquist mode has no sign; keep only its real, symmetric part
        phase[n // 2] = np.cos(k[n // 2] * A1 * t)
    out = np.fft.ifft(np.fft.fft(u) * growth * phase)
    scale = max(1.0, float(np.max(np.abs(u))))
    if np.max(np.abs(out.imag)) > 1e-12 * scale:
        raise NumericalError("spectral propagation left a non-negligible imaginary part")
    return MacroField(out.real, U0.t + t, U0.L)


def fd_stability_limit(A1: float, A2: float, h: float) -> float:
    limits = [np.inf]
    if A2 > 0:
        limits.append(0.4 * h * h / A2)
    if A1 != 0:
        limits.append(0.5 * h / abs(A1))
    return float(min(limits))


def _fd_rhs(u, A1, A2, h):
    up = np.roll(u, -1)
    um = np.roll(u, 1)
    return A1 * (up - um) / (2.0 * h) + A2 * (up - 2.0 * u + um) / (h * h)


def solve_fd(A1: float, A2: float, U0: MacroField, t: float, dt: float) -> MacroField:
    if A2 < 0:
        raise IllPosed(f"A2 = {A2!r} < 0 makes the macroscale problem ill-posed")
    u = np.array(U0.values, dtype=float)
    h = U0.L / u.shape[0]
    limit = fd_stability_limit(A1, A2, h)
    if not 0 < dt <= limit:
        raise StabilityError(f"dt={dt!r} violates the stability limit {limit:.6g}",
                             suggested_dt=0.9 * limit if np.isfinite(limit) else None)
    nsteps = int(np.ceil(t / dt - 1e-9)) if t > 0 else 0
    if nsteps:
        dt = t / nsteps
    for _ in range(nsteps):
        k1 = _fd_rhs(u, A1, A2, h)
        k2 = _fd_rhs(u + 0.5 * dt * k1, A1, A2, h)
        k3 = _fd_rhs(u + 0.5 * dt * k2, A1, A2, h)
        k4 = _fd_rhs(u + dt * k3, A1, A2, h)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return MacroField(u, U0.t + t, U0.L)


def macro_series(A1: float, A2: float, U0: MacroField, times, method: str = "spectral",
                 dt: float | None = None) -> list[MacroField]:
    """Solutions at absolute ``times`` (each propagated directly from U0)."""
    out = []
    for t in times:
        span = float(t) - U0.t
        if method == "spectral":
            out.append(solve_spectral(A1, A2, U0, span))
        elif method == "fd":
            h = U0.L / U0.values.shape[0]
            step = dt or 0.9 * fd_stability_limit(A1, A2, h)
            out.append(solve_fd(A1, A2, U0, span, min(step, 0.1)))
        else:
            raise InvalidArgument(f"unknown macro method {method!r}")
    return out
