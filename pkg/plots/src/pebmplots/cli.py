"""Command-line driver for batch figure generation.

Usage::

    pebm-plots energy     energy.csv          -o energy.png
    pebm-plots orbit      orbit_residuals.csv -o orbit.svg
    pebm-plots surface    state.snap          -o surface.png [--title TEXT]
    pebm-plots difference difference.csv      -o difference.png

Exit status: 0 on success, 1 when the input artifact is missing or
malformed, 2 on bad usage.  On failure no output file is created.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

from pebmplots.io import (
    ArtifactError,
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

__all__ = ["main", "console_main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pebm-plots",
        description="Render figures from solver run artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("input", help="path to the input artifact")
        cmd.add_argument(
            "-o",
            "--out",
            required=True,
            help="output image path (.png or .svg)",
        )
        return cmd

    add("energy", "energy history from an energy trace CSV")
    add("orbit", "period-map residuals from an orbit residual CSV")
    surface = add("surface", "surface-field heatmap from a state snapshot")
    surface.add_argument(
        "--title", default=None, help="override the figure title"
    )
    add("difference", "two-run separation from a difference trace CSV")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "energy":
            out = plot_energy(read_energy_trace(args.input), args.out)
        elif args.command == "orbit":
            out = plot_orbit_convergence(
                read_orbit_residuals(args.input), args.out
            )
        elif args.command == "surface":
            out = plot_surface(
                read_snapshot(args.input), args.out, title=args.title
            )
        else:
            out = plot_difference(
                read_difference_trace(args.input), args.out
            )
    except ValueError as exc:
        parser.error(str(exc))
    except (ArtifactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
