"""Command-line driver.

Subcommands::

    pebm simulate       time integration; writes energy.csv, final.snap
    pebm find-periodic  fixed point of the period map; orbit outputs
    pebm steady         march to steady state under constant forcing
    pebm check-energy   audit an energy.csv against the energy inequality
                        and the a-priori envelope
    pebm ws-uniqueness  twin-run separation growth certificate

Exit codes: 0 success; 1 the computation ran but failed its check
(non-convergence, inequality violation, numerical failure); 2 bad usage,
configuration, or input files.

The report path of every subcommand renders matplotlib figures next to the
delimited output unless figures are disabled.  PEBM_THREADS caps the thread
pools of the numerical backends when set before launch.
"""

from __future__ import annotations

import argparse
import os
import pathlib
import sys

_threads = os.environ.get("PEBM_THREADS", "")
if _threads.isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pebm",
        description="hydrostatic flow coupled to a reactive surface "
                    "energy balance: simulation and certification tools")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="INI run configuration file")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    common.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering")

    p = sub.add_parser("simulate", parents=[common],
                       help="integrate forward in time")
    p.add_argument("--resume", help="start from a snapshot file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("find-periodic", parents=[common],
                       help="find a time-periodic solution")
    p.set_defaults(func=cmd_find_periodic)

    p = sub.add_parser("steady", parents=[common],
                       help="find a steady state (constant forcing)")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("check-energy", parents=[common],
                       help="audit an energy trace")
    p.add_argument("--trace", required=True, help="energy CSV to audit")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="relative tolerance for both checks")
    p.set_defaults(func=cmd_check_energy)

    p = sub.add_parser("ws-uniqueness", parents=[common],
                       help="twin-run separation certificate")
    p.set_defaults(func=cmd_ws)

    return parser


def _emit(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _prepare(args):
    from .config import load_config, build_system
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.out:
        cfg.output.dir = args.out
    if args.no_figures:
        cfg.output.figures = False
    grid, params, forcing = build_system(cfg)
    outdir = pathlib.Path(cfg.output.dir)
    outdir.mkdir(parents=True, exist_ok=True)
    return cfg, grid, params, forcing, outdir


def _initial_state(cfg, grid, resume=None):
    import numpy as np
    from . import fields
    from .snapshot import load_snapshot
    if resume is not None:
        state = load_snapshot(resume)
        fields.validate_state(grid, state)
        return state
    if cfg.run.init == "zeros":
        return fields.zeros_state(grid)
    if cfg.run.init == "file":
        state = load_snapshot(cfg.run.init_file)
        fields.validate_state(grid, state)
        return state
    rng = np.random.default_rng(cfg.run.seed)
    return fields.random_state(grid, rng, amplitude=cfg.run.init_amplitude)


def cmd_simulate(args) -> int:
    from . import report
    from .diagnostics import max_subinterval_residual
    from .snapshot import save_snapshot
    from .stepper import simulate

    cfg, grid, params, forcing, outdir = _prepare(args)
    state0 = _initial_state(cfg, grid, resume=args.resume)
    t_end = state0.t + cfg.run.t_end
    _emit(args, f"simulate: {cfg.nx}x{cfg.ny}x{cfg.nz}, "
          f"dt={cfg.stepper.dt}, t: {state0.t:g} -> {t_end:g}")
    observers = []
    if cfg.output.snapshot_every > 0:
        every = cfg.output.snapshot_every
        steps_done = [0]

        def _snap_observer(state, row):
            steps_done[0] += 1
            if steps_done[0] % every == 0:
                save_snapshot(outdir / f"state_{steps_done[0]:06d}.snap",
                              state)

        observers.append(_snap_observer)
    final, trace = simulate(grid, state0, forcing, params, cfg.stepper, t_end,
                            observers=tuple(observers))
    trace_path = outdir / cfg.output.trace
    trace.to_csv(trace_path)
    save_snapshot(outdir / "final.snap", final)
    residual = max_subinterval_residual(trace)
    _emit(args, f"steps: {len(trace) - 1}, final |v|^2={trace['v_sq'][-1]:.6g} "
          f"|T|^2={trace['T_sq'][-1]:.6g} |rho|^2={trace['rho_sq'][-1]:.6g}")
    _emit(args, f"max subinterval energy residual: {residual:.3e}")
    _emit(args, f"max |div_H vbar|: {float(trace['div_max'].max()):.3e}")
    if cfg.output.figures:
        report.plot_energy(trace, outdir / "energy.png")
        report.plot_surface(grid, final.rho, outdir / "surface.png")
    _emit(args, f"wrote {trace_path}, {outdir}/final.snap")
    return 0


def cmd_find_periodic(args) -> int:
    from . import report
    from .orbit import find_periodic, gronwall_ball_radius
    from .snapshot import save_snapshot
    from .config import orbit_config

    cfg, grid, params, forcing, outdir = _prepare(args)
    state0 = _initial_state(cfg, grid)
    ocfg = orbit_config(cfg)
    ball = None
    if ocfg.ball_radius_mode == "gronwall":
        ball = gronwall_ball_radius(grid, forcing, params, cfg.period)
        _emit(args, f"absorbing ball: radius^2={ball.radius_sq:.6g} "
              f"(decay rate {ball.lam:.4g})")
    result = find_periodic(grid, state0, forcing, params, cfg.stepper,
                           ocfg, ball=ball)
    with open(outdir / "orbit_residuals.csv", "w") as fh:
        fh.write("iteration,residual,weighted_energy\n")
        for i, r in enumerate(result.residual_history, start=1):
            fh.write(f"{i},{r!r},{result.y_history[i - 1]!r}\n")
    save_snapshot(outdir / "orbit_state.snap", result.state)
    if result.energy_trace_final_period is not None:
        result.energy_trace_final_period.to_csv(outdir / "orbit_energy.csv")
    if cfg.output.figures:
        if result.residual_history:
            report.plot_orbit_convergence(result.residual_history,
                                          outdir / "orbit_convergence.png")
        if result.energy_trace_final_period is not None:
            report.plot_energy(result.energy_trace_final_period,
                               outdir / "orbit_energy.png")
        report.plot_surface(grid, result.state.rho,
                            outdir / "orbit_surface.png")
    status = "converged" if result.converged else "NOT converged"
    last = (f"{result.residual_history[-1]:.3e}"
            if result.residual_history else "n/a")
    _emit(args, f"period map {status} in {result.iterations} iterations; "
          f"final residual {last}")
    if result.failure:
        _emit(args, f"iteration aborted: {result.failure}")
    if ball is not None:
        _emit(args, f"iterate inside absorbing ball: {result.inside_ball}")
    _emit(args, f"wrote {outdir}/orbit_residuals.csv, "
          f"{outdir}/orbit_state.snap")
    return 0 if result.converged else 1


def cmd_steady(args) -> int:
    from . import report
    from .orbit import find_steady_state
    from .snapshot import save_snapshot

    cfg, grid, params, forcing, outdir = _prepare(args)
    time_dependent = [m for m in cfg.modes if m.n > 0]
    if time_dependent:
        print("error: steady requires time-constant forcing; "
              f"{len(time_dependent)} mode(s) have n > 0", file=sys.stderr)
        return 2
    state0 = _initial_state(cfg, grid)
    result = find_steady_state(grid, state0, forcing, params, cfg.stepper,
                               tol=cfg.steady.tol,
                               chunk_time=cfg.steady.chunk_time,
                               max_chunks=cfg.steady.max_chunks)
    save_snapshot(outdir / "steady_state.snap", result.state)
    with open(outdir / "steady_rates.csv", "w") as fh:
        fh.write("chunk,rate\n")
        for i, r in enumerate(result.rate_history, start=1):
            fh.write(f"{i},{r!r}\n")
    rn = result.residual_norms
    if cfg.output.figures:
        report.plot_surface(grid, result.state.rho, outdir / "steady_surface.png")
    status = "converged" if result.converged else "NOT converged"
    _emit(args, f"steady march {status} after t={result.time_integrated:g}; "
          f"rate {result.rate:.3e}")
    _emit(args, f"steady residual norms: v={rn['v']:.3e} T={rn['T']:.3e} "
          f"rho={rn['rho']:.3e}")
    _emit(args, f"wrote {outdir}/steady_state.snap")
    return 0 if result.converged else 1


def cmd_check_energy(args) -> int:
    from . import report
    from .diagnostics import (EnergyTrace, gronwall_envelope_check,
                              max_subinterval_residual)
    from .physics import absorption_constant_sq

    cfg, grid, params, forcing, outdir = _prepare(args)
    trace = EnergyTrace.from_csv(args.trace)
    if len(trace) < 2:
        print("error: trace has fewer than two records", file=sys.stderr)
        return 2
    scale = max(1.0, float(trace.sum_sq().max()))
    residual = max_subinterval_residual(trace)
    ineq_ok = residual <= args.tol * scale
    env = gronwall_envelope_check(trace, absorption_constant_sq(params))
    env_ok = env.max_relative_violation <= args.tol
    _emit(args, f"energy inequality: max subinterval residual "
          f"{residual:.3e} (scale {scale:.3g}) -> "
          f"{'PASS' if ineq_ok else 'FAIL'}")
    _emit(args, f"a-priori envelope: max relative violation "
          f"{env.max_relative_violation:.3e} at t={env.t_at_max:g} -> "
          f"{'PASS' if env_ok else 'FAIL'}")
    if cfg.output.figures:
        report.plot_energy(trace, outdir / "checked_energy.png")
    return 0 if (ineq_ok and env_ok) else 1


def cmd_ws(args) -> int:
    import numpy as np
    from . import report
    from .diagnostics import weak_strong_contraction, reaction_work_bound
    from .fields import State, project_barotropic
    from .stepper import iterate_states

    cfg, grid, params, forcing, outdir = _prepare(args)
    base = _initial_state(cfg, grid)
    if cfg.ws.perturbation == 0.0:
        perturbed = base.copy()
    else:
        rng = np.random.default_rng(cfg.run.seed + 1)
        from .fields import random_state
        bump = random_state(grid, rng, amplitude=cfg.ws.perturbation)
        perturbed = State(v=project_barotropic(grid, base.v + bump.v),
                          T=base.T + bump.T, rho=base.rho + bump.rho,
                          t=base.t)
    n_steps = int(round(cfg.ws.t_end / cfg.stepper.dt))
    traj1 = iterate_states(grid, base, forcing, params, cfg.stepper, n_steps)
    traj2 = iterate_states(grid, perturbed, forcing, params, cfg.stepper,
                           n_steps)
    trace, cert = weak_strong_contraction(grid, traj1, traj2)
    trace.to_csv(outdir / "difference.csv")
    cert.to_text(outdir / "contraction.txt")
    lhs, rhs = reaction_work_bound(grid, base.rho, perturbed.rho, params)
    if cfg.output.figures:
        report.plot_difference(trace, outdir / "difference.png")
    _emit(args, f"separation: sigma0^2={cert.sigma0_sq:.6g} -> "
          f"sigma^2(t_end)={cert.sigma_final_sq:.6g}")
    _emit(args, f"fitted contraction constant: {cert.c_fit:.6g} "
          f"(int g = {cert.g_integral:.6g}) -> "
          f"{'holds' if cert.holds else 'fails'}")
    _emit(args, f"reaction work bound: |cross work| {lhs:.6g} <= {rhs:.6g}: "
          f"{lhs <= rhs}")
    _emit(args, f"wrote {outdir}/difference.csv, {outdir}/contraction.txt")
    return 0 if cert.holds and lhs <= rhs else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .config import ConfigError
    from .snapshot import SnapshotError
    from .stepper import NumericsError
    try:
        return args.func(args)
    except (ConfigError, SnapshotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
