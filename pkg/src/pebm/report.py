"""Figure rendering for run reports.

All functions validate their inputs before opening the output file, draw on
an explicit Agg canvas (no pyplot global state), and produce deterministic
bytes for identical inputs within one process, so reports are reproducible
and a failed call never leaves a partial file behind.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .grid import Grid
from .diagnostics import EnergyTrace, DifferenceTrace

_DPI = 110


def _new_figure(width: float, height: float) -> Figure:
    fig = Figure(figsize=(width, height), dpi=_DPI)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path) -> str:
    fig.savefig(path, dpi=_DPI)
    return str(path)


def plot_energy(trace: EnergyTrace, path) -> str:
    """Two panels: component L2 norms over time, and the cumulative energy
    budget (dissipation, absorbed work, reaction sink)."""
    if len(trace) == 0:
        raise ValueError("cannot plot an empty energy trace")
    t = trace.t
    fig = _new_figure(8.0, 6.0)
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    ax1.plot(t, np.sqrt(trace["v_sq"]), label="|v|")
    ax1.plot(t, np.sqrt(trace["T_sq"]), label="|T|")
    ax1.plot(t, np.sqrt(trace["rho_sq"]), label="|rho|")
    ax1.set_ylabel("L2 norm")
    ax1.legend(loc="best")
    ax1.grid(True, alpha=0.3)
    ax2.plot(t, np.cumsum(trace["diss_inc"]), label="dissipation")
    ax2.plot(t, np.cumsum(trace["work_inc"]), label="work")
    ax2.plot(t, np.cumsum(trace["sink_inc"]), label="reaction sink")
    ax2.set_xlabel("t")
    ax2.set_ylabel("cumulative")
    ax2.legend(loc="best")
    ax2.grid(True, alpha=0.3)
    fig.suptitle("energy history")
    return _save(fig, path)


def plot_orbit_convergence(residuals, path) -> str:
    """Fixed-point residual versus period-map iteration, log scale."""
    res = np.asarray(list(residuals), dtype=float)
    if res.size == 0:
        raise ValueError("cannot plot an empty residual history")
    if np.any(~np.isfinite(res)) or np.any(res < 0.0):
        raise ValueError("residuals must be finite and nonnegative")
    fig = _new_figure(6.0, 4.5)
    ax = fig.subplots()
    it = np.arange(1, res.size + 1)
    ax.semilogy(it, np.maximum(res, 1e-300), marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("|S(X) - X|")
    ax.set_title("period-map convergence")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_surface(grid: Grid, rho: np.ndarray, path, title: str = "surface field") -> str:
    """Filled map of a surface field on the periodic unit square."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.nx, grid.ny):
        raise ValueError(
            f"surface field shape {rho.shape} does not match grid "
            f"({grid.nx}, {grid.ny})")
    if not np.all(np.isfinite(rho)):
        raise ValueError("surface field contains non-finite values")
    fig = _new_figure(6.0, 5.0)
    ax = fig.subplots()
    # pcolormesh on node edges so every periodic cell is drawn
    xe = np.linspace(0.0, 1.0, grid.nx + 1)
    ye = np.linspace(0.0, 1.0, grid.ny + 1)
    mesh = ax.pcolormesh(xe, ye, rho.T, shading="flat")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.set_aspect("equal")
    return _save(fig, path)


def plot_difference(trace: DifferenceTrace, path) -> str:
    """Squared separation of two trajectories over time, log scale."""
    if len(trace) == 0:
        raise ValueError("cannot plot an empty difference trace")
    fig = _new_figure(6.0, 4.5)
    ax = fig.subplots()
    sig = trace.sigma_sq()
    ax.semilogy(trace.t, np.maximum(sig, 1e-300), label="sigma^2")
    ax.semilogy(trace.t, np.maximum(trace["sigma_grad_sq"], 1e-300),
                label="gradient part", linestyle="--")
    ax.set_xlabel("t")
    ax.set_ylabel("squared distance")
    ax.set_title("trajectory separation")
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)
