"""INI run configuration.

One file describes a complete run: grid resolution, reaction physics,
forcing modes, time stepping, and the per-command sections (run, orbit,
steady, ws, output).  Parsing collects every violation before failing, so a
bad file is reported once with all problems listed.

Forcing modes are single lines under [forcing]::

    mode1 = target amplitude time_fn n space_fn kx ky [mz]

for example ``mode1 = f2 0.05 cos 1 cos 1 0 0`` adds
0.05 * cos(2 pi t / period) * cos(2 pi x) to the temperature source.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict

from .grid import make_grid, Grid
from .physics import (PhysicsParams, ForcingMode, ModeForcing,
                      make_solar_field)
from .stepper import StepperConfig
from .orbit import OrbitConfig


class ConfigError(ValueError):
    """Raised with every detected problem listed, one per line."""


@dataclass
class RunSection:
    t_end: float = 0.4
    seed: int = 1234
    init: str = "random"          # zeros | random | file
    init_file: str = ""
    init_amplitude: float = 0.05


@dataclass
class WsSection:
    t_end: float = 0.1
    perturbation: float = 1e-4


@dataclass
class SteadySection:
    tol: float = 1e-8
    chunk_time: float = 0.2
    max_chunks: int = 200


@dataclass
class OutputSection:
    dir: str = "out"
    figures: bool = True
    trace: str = "energy.csv"
    snapshot_every: int = 0      # steps between snapshots; 0 = final only


def _default_modes() -> list[ForcingMode]:
    return [
        ForcingMode("f1x", 0.05, "sin", 1, "sin", 0, 1, 1),
        ForcingMode("f2", 0.05, "cos", 1, "cos", 1, 0, 0),
        ForcingMode("f3", 0.02, "sin", 1, "sin", 1, 1, 0),
    ]


@dataclass
class Config:
    nx: int = 16
    ny: int = 16
    nz: int = 8
    beta1: float = 0.3
    beta2: float = 0.8
    rho_ref: float = 263.0
    q0: float = 16.0
    q1: float = 0.25
    period: float = 0.2
    modes: list[ForcingMode] = field(default_factory=_default_modes)
    stepper: StepperConfig = field(
        default_factory=lambda: StepperConfig(dt=0.002))
    orbit: OrbitConfig = field(
        default_factory=lambda: OrbitConfig(max_iters=80))
    run: RunSection = field(default_factory=RunSection)
    ws: WsSection = field(default_factory=WsSection)
    steady: SteadySection = field(default_factory=SteadySection)
    output: OutputSection = field(default_factory=OutputSection)


def default_config() -> Config:
    return Config()


_SECTIONS = {
    "grid": ("nx", "ny", "nz", "dt"),
    "physics": ("beta1", "beta2", "rho_ref", "q0", "q1"),
    "forcing": ("period",),      # plus mode* keys
    "stepper": ("scheme", "dealias", "blowup_threshold"),
    "orbit": ("max_iters", "tol", "acceleration", "anderson_m",
              "ball_radius_mode"),
    "run": ("t_end", "seed", "init", "init_file", "init_amplitude"),
    "ws": ("t_end", "perturbation"),
    "steady": ("tol", "chunk_time", "max_chunks"),
    "output": ("dir", "figures", "trace", "snapshot_every"),
}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_mode(key: str, text: str, errors: list) -> ForcingMode | None:
    tokens = text.split()
    if len(tokens) not in (7, 8):
        errors.append(
            f"forcing.{key}: expected 'target amplitude time_fn n space_fn "
            f"kx ky [mz]', got {len(tokens)} tokens")
        return None
    try:
        mode = ForcingMode(
            target=tokens[0], amplitude=float(tokens[1]), time_fn=tokens[2],
            n=int(tokens[3]), space_fn=tokens[4], kx=int(tokens[5]),
            ky=int(tokens[6]), mz=int(tokens[7]) if len(tokens) == 8 else 0)
    except ValueError as exc:
        errors.append(f"forcing.{key}: {exc}")
        return None
    for msg in mode.validation_errors():
        errors.append(f"forcing.{key}: {msg}")
    return mode


def _is_multiple(span: float, dt: float) -> bool:
    n = round(span / dt)
    return n >= 1 and abs(span - n * dt) <= 1e-9 * max(1.0, abs(span))


def load_config(path) -> Config:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    errors: list[str] = []
    cfg = Config()

    for section in cp.sections():
        if section not in _SECTIONS:
            errors.append(f"unknown section [{section}]")
            continue
        for key in cp[section]:
            if key.startswith("mode") and section == "forcing":
                continue
            if key not in _SECTIONS[section]:
                errors.append(f"unknown key {section}.{key}")

    def read(section: str, key: str, conv, current):
        if section not in cp or key not in cp[section]:
            return current
        raw = cp[section][key].strip()
        if conv is bool:
            if raw.lower() not in _BOOL_WORDS:
                errors.append(f"{section}.{key}: not a boolean: {raw!r}")
                return current
            return _BOOL_WORDS[raw.lower()]
        if conv is str:
            return raw
        try:
            return conv(raw)
        except ValueError:
            errors.append(
                f"{section}.{key}: cannot parse {raw!r} as {conv.__name__}")
            return current

    cfg.nx = read("grid", "nx", int, cfg.nx)
    cfg.ny = read("grid", "ny", int, cfg.ny)
    cfg.nz = read("grid", "nz", int, cfg.nz)
    cfg.stepper.dt = read("grid", "dt", float, cfg.stepper.dt)
    cfg.beta1 = read("physics", "beta1", float, cfg.beta1)
    cfg.beta2 = read("physics", "beta2", float, cfg.beta2)
    cfg.rho_ref = read("physics", "rho_ref", float, cfg.rho_ref)
    cfg.q0 = read("physics", "q0", float, cfg.q0)
    cfg.q1 = read("physics", "q1", float, cfg.q1)
    cfg.period = read("forcing", "period", float, cfg.period)
    if "forcing" in cp:
        mode_keys = sorted(k for k in cp["forcing"] if k.startswith("mode"))
        if mode_keys:
            cfg.modes = []
            for key in mode_keys:
                mode = _parse_mode(key, cp["forcing"][key], errors)
                if mode is not None:
                    cfg.modes.append(mode)
    st = cfg.stepper
    st.scheme = read("stepper", "scheme", str, st.scheme)
    st.dealias = read("stepper", "dealias", bool, st.dealias)
    st.blowup_threshold = read("stepper", "blowup_threshold", float,
                               st.blowup_threshold)
    ob = cfg.orbit
    ob.max_iters = read("orbit", "max_iters", int, ob.max_iters)
    ob.tol = read("orbit", "tol", float, ob.tol)
    ob.acceleration = read("orbit", "acceleration", str, ob.acceleration)
    ob.anderson_m = read("orbit", "anderson_m", int, ob.anderson_m)
    ob.ball_radius_mode = read("orbit", "ball_radius_mode", str,
                               ob.ball_radius_mode)
    rn = cfg.run
    rn.t_end = read("run", "t_end", float, rn.t_end)
    rn.seed = read("run", "seed", int, rn.seed)
    rn.init = read("run", "init", str, rn.init)
    rn.init_file = read("run", "init_file", str, rn.init_file)
    rn.init_amplitude = read("run", "init_amplitude", float, rn.init_amplitude)
    ws = cfg.ws
    ws.t_end = read("ws", "t_end", float, ws.t_end)
    ws.perturbation = read("ws", "perturbation", float, ws.perturbation)
    sd = cfg.steady
    sd.tol = read("steady", "tol", float, sd.tol)
    sd.chunk_time = read("steady", "chunk_time", float, sd.chunk_time)
    sd.max_chunks = read("steady", "max_chunks", int, sd.max_chunks)
    out = cfg.output
    out.dir = read("output", "dir", str, out.dir)
    out.figures = read("output", "figures", bool, out.figures)
    out.trace = read("output", "trace", str, out.trace)
    out.snapshot_every = read("output", "snapshot_every", int,
                              out.snapshot_every)

    errors.extend(validate_config(cfg))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def validate_config(cfg: Config) -> list[str]:
    """Semantic checks across sections; returns all problems found."""
    errors: list[str] = []
    try:
        make_grid(cfg.nx, cfg.ny, cfg.nz, max(cfg.stepper.dt, 1e-300))
    except ValueError as exc:
        errors.append(str(exc))
    if not (0.0 < cfg.beta1 < cfg.beta2):
        errors.append(
            f"physics: need 0 < beta1 < beta2, got {cfg.beta1}, {cfg.beta2}")
    if cfg.q0 < 0.0:
        errors.append(f"physics.q0 must be >= 0, got {cfg.q0}")
    if abs(cfg.q1) > 1.0:
        errors.append(f"physics.q1 must lie in [-1, 1], got {cfg.q1}")
    if not (cfg.period > 0.0):
        errors.append(f"forcing.period must be positive, got {cfg.period}")
    errors.extend(f"stepper: {m}" for m in cfg.stepper.validation_errors())
    ob = OrbitConfig(period=cfg.period, max_iters=cfg.orbit.max_iters,
                     tol=cfg.orbit.tol, acceleration=cfg.orbit.acceleration,
                     anderson_m=cfg.orbit.anderson_m,
                     ball_radius_mode=cfg.orbit.ball_radius_mode)
    errors.extend(f"orbit: {m}" for m in ob.validation_errors())
    dt = cfg.stepper.dt
    if dt > 0.0:
        if cfg.period > 0.0 and not _is_multiple(cfg.period, dt):
            errors.append(
                f"forcing.period {cfg.period} is not an integer multiple of "
                f"stepper.dt {dt}")
        for name, span in (("run.t_end", cfg.run.t_end),
                           ("ws.t_end", cfg.ws.t_end),
                           ("steady.chunk_time", cfg.steady.chunk_time)):
            if not _is_multiple(span, dt):
                errors.append(
                    f"{name} {span} is not a positive integer multiple of "
                    f"stepper.dt {dt}")
    if cfg.run.init not in ("zeros", "random", "file"):
        errors.append(
            f"run.init must be zeros, random, or file, got {cfg.run.init!r}")
    elif cfg.run.init == "file" and not cfg.run.init_file:
        errors.append("run.init_file is required when run.init = file")
    if not (cfg.run.init_amplitude >= 0.0):
        errors.append("run.init_amplitude must be >= 0")
    if not (cfg.ws.perturbation >= 0.0):
        errors.append("ws.perturbation must be >= 0")
    if not (cfg.steady.tol > 0.0):
        errors.append("steady.tol must be positive")
    if cfg.steady.max_chunks < 1:
        errors.append("steady.max_chunks must be >= 1")
    if cfg.output.snapshot_every < 0:
        errors.append("output.snapshot_every must be >= 0")
    if not cfg.output.trace:
        errors.append("output.trace must not be empty")
    return errors


def save_config(cfg: Config, path) -> None:
    cp = configparser.ConfigParser()
    cp["grid"] = {k: repr(getattr(cfg, k)) for k in ("nx", "ny", "nz")}
    cp["grid"]["dt"] = repr(cfg.stepper.dt)
    cp["physics"] = {k: repr(getattr(cfg, k))
                     for k in ("beta1", "beta2", "rho_ref", "q0", "q1")}
    forcing = {"period": repr(cfg.period)}
    for i, m in enumerate(cfg.modes, start=1):
        forcing[f"mode{i}"] = (f"{m.target} {m.amplitude!r} {m.time_fn} "
                               f"{m.n} {m.space_fn} {m.kx} {m.ky} {m.mz}")
    cp["forcing"] = forcing
    cp["stepper"] = {
        "scheme": cfg.stepper.scheme,
        "dealias": str(cfg.stepper.dealias).lower(),
        "blowup_threshold": repr(cfg.stepper.blowup_threshold)}
    cp["orbit"] = {
        "max_iters": repr(cfg.orbit.max_iters), "tol": repr(cfg.orbit.tol),
        "acceleration": cfg.orbit.acceleration,
        "anderson_m": repr(cfg.orbit.anderson_m),
        "ball_radius_mode": cfg.orbit.ball_radius_mode}
    cp["run"] = {k: (v if isinstance(v, str) else repr(v))
                 for k, v in asdict(cfg.run).items()}
    cp["ws"] = {k: repr(v) for k, v in asdict(cfg.ws).items()}
    cp["steady"] = {k: repr(v) for k, v in asdict(cfg.steady).items()}
    cp["output"] = {"dir": cfg.output.dir,
                    "figures": str(cfg.output.figures).lower(),
                    "trace": cfg.output.trace,
                    "snapshot_every": repr(cfg.output.snapshot_every)}
    with open(path, "w") as fh:
        cp.write(fh)


def build_system(cfg: Config) -> tuple[Grid, PhysicsParams, ModeForcing]:
    """Construct the grid, physics parameters, and forcing from a config."""
    grid = make_grid(cfg.nx, cfg.ny, cfg.nz, cfg.stepper.dt)
    Q = make_solar_field(grid, cfg.q0, cfg.q1)
    params = PhysicsParams(beta1=cfg.beta1, beta2=cfg.beta2,
                           rho_ref=cfg.rho_ref, Q=Q)
    problems = params.validation_errors()
    if problems:
        raise ConfigError("; ".join(problems))
    forcing = ModeForcing(grid, cfg.period, cfg.modes)
    return grid, params, forcing


def orbit_config(cfg: Config) -> OrbitConfig:
    return OrbitConfig(period=cfg.period, max_iters=cfg.orbit.max_iters,
                       tol=cfg.orbit.tol,
                       acceleration=cfg.orbit.acceleration,
                       anderson_m=cfg.orbit.anderson_m,
                       ball_radius_mode=cfg.orbit.ball_radius_mode)
