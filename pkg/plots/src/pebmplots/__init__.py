"""Figure generation for solver run artifacts.

This package turns the files a solver run leaves behind -- CSV energy and
difference traces, orbit-residual tables, and binary state snapshots -- into
publication-style figures.  It reads those files directly through their
documented on-disk formats and has no dependency on the solver package
itself, so it can post-process archived run directories anywhere.
"""

from pebmplots.io import (
    ArtifactError,
    Snapshot,
    TraceFrame,
    read_difference_trace,
    read_energy_trace,
    read_orbit_residuals,
    read_snapshot,
)
from pebmplots.figures import (
    plot_difference,
    plot_energy,
    plot_orbit_convergence,
    plot_surface,
)

__all__ = [
    "ArtifactError",
    "Snapshot",
    "TraceFrame",
    "read_difference_trace",
    "read_energy_trace",
    "read_orbit_residuals",
    "read_snapshot",
    "plot_difference",
    "plot_energy",
    "plot_orbit_convergence",
    "plot_surface",
]

__version__ = "0.1.0"
