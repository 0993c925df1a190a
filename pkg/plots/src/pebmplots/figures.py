"""Deterministic figure rendering for parsed run artifacts.

All figures are drawn on explicit Agg canvases with a fixed dpi, a fixed
SVG hash salt, and no date metadata, so rendering the same input twice
produces byte-identical output.  Each renderer validates its input first
and stages the image in memory; the output file is written only after the
render succeeds, so a malformed artifact never leaves a partial file
behind.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from pebmplots.io import ArtifactError, Snapshot, TraceFrame

__all__ = [
    "plot_energy",
    "plot_orbit_convergence",
    "plot_surface",
    "plot_difference",
]

_DPI = 110
# fixed salt so SVG element ids do not depend on the output path or process
_SVG_RC = {"svg.hashsalt": "pebm-plots"}
_FLOOR = 1e-300  # keeps exact zeros drawable on logarithmic axes


def _render(fig: Figure, path: str | Path) -> str:
    """Rasterise ``fig`` to memory, then write the file in one shot."""
    path = Path(path)
    suffix = path.suffix.lower().lstrip(".")
    if suffix not in ("png", "svg"):
        raise ValueError(
            f"unsupported output format {path.suffix!r}, use .png or .svg"
        )
    FigureCanvasAgg(fig)
    buf = io.BytesIO()
    with matplotlib.rc_context(_SVG_RC):
        if suffix == "svg":
            fig.savefig(buf, format="svg", dpi=_DPI, metadata={"Date": None})
        else:
            fig.savefig(buf, format="png", dpi=_DPI)
    path.write_bytes(buf.getvalue())
    return str(path)


def _require_rows(frame: TraceFrame) -> None:
    if len(frame) == 0:
        raise ArtifactError(f"{frame.path}: trace has no data rows")


def _require_finite(frame: TraceFrame, names: tuple[str, ...]) -> None:
    for name in names:
        if not np.all(np.isfinite(frame[name])):
            raise ArtifactError(
                f"{frame.path}: column {name!r} contains non-finite values"
            )


def _require_nonnegative(frame: TraceFrame, names: tuple[str, ...]) -> None:
    for name in names:
        if np.any(frame[name] < 0.0):
            raise ArtifactError(
                f"{frame.path}: column {name!r} holds squared norms "
                "and must be non-negative"
            )


def plot_energy(trace: TraceFrame, path: str | Path) -> str:
    """Two-panel energy history with the integrated balance residual.

    Left panel: norms of the three state components over time.  Right
    panel: cumulative dissipation, forcing work, and sink contributions.
    The title reports the whole-run balance residual

        [E(end) - E(start)] + 2*(dissipation + sink) - 2*work,

    computed from the per-step increment columns; for a healthy run it is
    tiny relative to the energy scale.
    """
    _require_rows(trace)
    norm_cols = ("v_sq", "T_sq", "rho_sq")
    inc_cols = ("diss_inc", "work_inc", "sink_inc")
    _require_finite(trace, ("t",) + norm_cols + inc_cols)
    _require_nonnegative(trace, norm_cols)

    t = trace["t"]
    energy = trace["v_sq"] + trace["T_sq"] + trace["rho_sq"]
    residual = float(
        (energy[-1] - energy[0])
        + 2.0 * (np.sum(trace["diss_inc"]) + np.sum(trace["sink_inc"]))
        - 2.0 * np.sum(trace["work_inc"])
    )

    fig = Figure(figsize=(9.0, 3.6), dpi=_DPI)
    ax_norm, ax_bal = fig.subplots(1, 2)

    ax_norm.plot(t, np.sqrt(trace["v_sq"]), label="|v|")
    ax_norm.plot(t, np.sqrt(trace["T_sq"]), label="|T|")
    ax_norm.plot(t, np.sqrt(trace["rho_sq"]), label="|rho|")
    ax_norm.set_xlabel("t")
    ax_norm.set_ylabel("norm")
    ax_norm.legend(loc="best", fontsize="small")

    ax_bal.plot(t, 2.0 * np.cumsum(trace["diss_inc"]), label="dissipation")
    ax_bal.plot(t, 2.0 * np.cumsum(trace["work_inc"]), label="work")
    ax_bal.plot(t, 2.0 * np.cumsum(trace["sink_inc"]), label="sink")
    ax_bal.set_xlabel("t")
    ax_bal.set_ylabel("cumulative contribution")
    ax_bal.legend(loc="best", fontsize="small")

    fig.suptitle(f"energy history  (balance residual {residual:+.3e})")
    fig.tight_layout()
    return _render(fig, path)


def plot_orbit_convergence(frame: TraceFrame, path: str | Path) -> str:
    """Residual of the period-map iteration on a logarithmic axis."""
    _require_rows(frame)
    _require_finite(frame, ("iteration", "residual"))
    _require_nonnegative(frame, ("residual",))

    fig = Figure(figsize=(5.0, 3.6), dpi=_DPI)
    ax = fig.subplots()
    ax.semilogy(
        frame["iteration"],
        np.maximum(frame["residual"], _FLOOR),
        marker="o",
    )
    ax.set_xlabel("iteration")
    ax.set_ylabel("|S(X) - X|")
    ax.set_title("period-map convergence")
    fig.tight_layout()
    return _render(fig, path)


def plot_surface(snap: Snapshot, path: str | Path, title: str | None = None) -> str:
    """Heatmap of the surface field from a state snapshot."""
    if not np.all(np.isfinite(snap.rho)):
        raise ArtifactError(
            f"{snap.path}: surface field contains non-finite values"
        )
    fig = Figure(figsize=(5.4, 4.4), dpi=_DPI)
    ax = fig.subplots()
    xe = np.linspace(0.0, 1.0, snap.nx + 1)
    ye = np.linspace(0.0, 1.0, snap.ny + 1)
    mesh = ax.pcolormesh(xe, ye, snap.rho.T, shading="flat")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.set_title(title if title is not None else f"surface field at t = {snap.t:g}")
    fig.tight_layout()
    return _render(fig, path)


def plot_difference(trace: TraceFrame, path: str | Path) -> str:
    """Separation of two runs against its integrated growth envelope.

    Plots the total squared separation and its gradient part, plus the
    envelope ``sigma^2(0) * exp(integral of g_weight)`` obtained by
    trapezoidal integration of the growth-weight column.  When the
    separation stays under the envelope the continuous-dependence bound
    holds for the pair of runs.
    """
    _require_rows(trace)
    sq_cols = ("sigma_v_sq", "sigma_T_sq", "sigma_rho_sq", "sigma_grad_sq")
    _require_finite(trace, ("t", "g_weight") + sq_cols)
    _require_nonnegative(trace, sq_cols)

    t = trace["t"]
    sigma_sq = trace["sigma_v_sq"] + trace["sigma_T_sq"] + trace["sigma_rho_sq"]
    g = trace["g_weight"]
    if len(t) > 1:
        growth = np.concatenate(
            ([0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t)))
        )
    else:
        growth = np.zeros(1)
    envelope = sigma_sq[0] * np.exp(growth)

    fig = Figure(figsize=(6.0, 3.8), dpi=_DPI)
    ax = fig.subplots()
    ax.semilogy(t, np.maximum(sigma_sq, _FLOOR), label="sigma^2")
    ax.semilogy(
        t,
        np.maximum(trace["sigma_grad_sq"], _FLOOR),
        linestyle="--",
        label="gradient part",
    )
    ax.semilogy(
        t,
        np.maximum(envelope, _FLOOR),
        linestyle=":",
        label="growth envelope",
    )
    ax.set_xlabel("t")
    ax.set_ylabel("squared separation")
    ax.legend(loc="best", fontsize="small")
    ax.set_title("trajectory separation")
    fig.tight_layout()
    return _render(fig, path)
