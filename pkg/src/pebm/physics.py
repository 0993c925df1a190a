"""Surface reaction physics and time-periodic volume forcing.

The surface reaction is R(x, rho) = Q(x) * coalbedo(rho) - |rho|^3 rho with a
smooth tanh ramp between the two co-albedo plateaus beta1 < beta2.  Forcing
terms (f1 for momentum, f2 for temperature, f3 for the surface field) are
finite sums of separable modes

    amplitude * cos/sin(2 pi n t / period) * cos/sin(2 pi (kx x + ky y))
              * cos(mz pi z)

so they are exactly periodic in time; evaluation reduces t modulo the period
with fmod (exact in IEEE arithmetic), which makes eval(t + period) bitwise
equal to eval(t) whenever both instants are represented exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid


# ----------------------------------------------------------------------
# reaction


@dataclass
class PhysicsParams:
    """Co-albedo plateaus, ramp center, and insolation field Q on (nx, ny)."""

    beta1: float
    beta2: float
    rho_ref: float
    Q: np.ndarray

    def validation_errors(self) -> list[str]:
        errors = []
        if not (0.0 < self.beta1 < self.beta2):
            errors.append(
                f"need 0 < beta1 < beta2, got beta1={self.beta1}, beta2={self.beta2}")
        if np.any(self.Q < 0.0) or not np.all(np.isfinite(self.Q)):
            errors.append("Q must be finite and nonnegative")
        return errors


def coalbedo(rho: np.ndarray, params: PhysicsParams) -> np.ndarray:
    """beta1 + (beta2 - beta1) * (1 + tanh(rho - rho_ref)) / 2.

    Strictly increasing with strict bounds beta1 < coalbedo < beta2.
    Evaluated in the symmetric form mid + half * tanh(rho - rho_ref) with
    mid = (beta1 + beta2) / 2, so coalbedo(rho_ref) equals the midpoint
    exactly in floating point (tanh(0) == 0), not just to rounding.
    """
    mid = 0.5 * (params.beta1 + params.beta2)
    half = 0.5 * (params.beta2 - params.beta1)
    return mid + half * np.tanh(rho - params.rho_ref)


def reaction(rho: np.ndarray, params: PhysicsParams) -> np.ndarray:
    """R(x, rho) = Q(x) * coalbedo(rho) - |rho|^3 rho, evaluated pointwise."""
    return params.Q * coalbedo(rho, params) - np.abs(rho) ** 3 * rho


def make_solar_field(grid: Grid, q0: float, q1: float = 0.0) -> np.ndarray:
    """Insolation Q(x, y) = q0 * (1 + q1 cos(2 pi y)); q0 >= 0, |q1| <= 1
    keeps it nonnegative."""
    y = grid.y[None, :]
    return (q0 * (1.0 + q1 * np.cos(2.0 * np.pi * y))) * np.ones((grid.nx, 1))


def absorption_constant_sq(params: PhysicsParams) -> float:
    """Constant C^2 with 2 * Q * beta2 * |r| <= 2 |r|^5 + C^2 pointwise
    (sharp Young constant), integrated over the unit square.

    This is the constant entering Phi = C^2 + sum of forcing norms; it is 0
    when Q vanishes.
    """
    m = float(np.max(params.Q)) * params.beta2
    if m <= 0.0:
        return 0.0
    return (8.0 * m / 5.0) * (m / 5.0) ** 0.25


# ----------------------------------------------------------------------
# forcing


@dataclass
class ForcingMode:
    """One separable forcing mode.

    target: which right-hand side it feeds ('f1x', 'f1y', 'f2', 'f3').
    time_fn / space_fn: 'cos' or 'sin'.
    n: integer multiple of the base frequency 2 pi / period.
    kx, ky: integer horizontal wavenumbers; mz: vertical cosine index
    (z-profile cos(mz pi z), Neumann compatible; ignored for 'f3').
    """

    target: str
    amplitude: float
    time_fn: str
    n: int
    space_fn: str
    kx: int
    ky: int
    mz: int = 0

    def validation_errors(self) -> list[str]:
        errors = []
        if self.target not in ("f1x", "f1y", "f2", "f3"):
            errors.append(f"unknown forcing target {self.target!r}")
        if self.time_fn not in ("cos", "sin"):
            errors.append(f"time_fn must be cos or sin, got {self.time_fn!r}")
        if self.space_fn not in ("cos", "sin"):
            errors.append(f"space_fn must be cos or sin, got {self.space_fn!r}")
        if self.n < 0:
            errors.append(f"n must be >= 0, got {self.n}")
        if self.mz < 0:
            errors.append(f"mz must be >= 0, got {self.mz}")
        return errors


class ModeForcing:
    """Forcing assembled from a list of ForcingMode entries."""

    def __init__(self, grid: Grid, period: float,
                 modes: list[ForcingMode] | None = None):
        if period <= 0.0:
            raise ValueError(f"forcing period must be positive, got {period}")
        self.grid = grid
        self.period = period
        self.modes = list(modes or [])
        self._compiled = [
            (m.target, m.amplitude, m.time_fn, m.n, self._pattern(m))
            for m in self.modes
        ]

    def _pattern(self, m: ForcingMode) -> np.ndarray:
        g = self.grid
        phase = 2.0 * np.pi * (m.kx * g.x[:, None] + m.ky * g.y[None, :])
        horiz = np.cos(phase) if m.space_fn == "cos" else np.sin(phase)
        if m.target == "f3":
            return horiz
        vert = np.cos(m.mz * np.pi * g.z_centers)
        return horiz[:, :, None] * vert[None, None, :]

    def eval(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = self.grid
        f1 = np.zeros((2, g.nx, g.ny, g.nz))
        f2 = np.zeros((g.nx, g.ny, g.nz))
        f3 = np.zeros((g.nx, g.ny))
        u = math.fmod(t, self.period)
        for target, amp, time_fn, n, pattern in self._compiled:
            arg = 2.0 * np.pi * n * (u / self.period)
            tf = math.cos(arg) if time_fn == "cos" else math.sin(arg)
            contrib = amp * tf
            if target == "f1x":
                f1[0] += contrib * pattern
            elif target == "f1y":
                f1[1] += contrib * pattern
            elif target == "f2":
                f2 += contrib * pattern
            else:
                f3 += contrib * pattern
        return f1, f2, f3


class CallableForcing:
    """Adapter giving an arbitrary fn(t) -> (f1, f2, f3) the forcing
    interface; fn must itself be period-periodic."""

    def __init__(self, period: float, fn):
        self.period = period
        self._fn = fn

    def eval(self, t: float):
        return self._fn(t)


def zero_forcing(grid: Grid, period: float = 1.0) -> ModeForcing:
    return ModeForcing(grid, period, [])


def eval_forcing(forcing, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate (f1, f2, f3) at time t."""
    return forcing.eval(t)
