"""Time-periodic and steady solutions via the period map.

The period map S advances a state over one forcing period starting from
t = 0; a time-periodic solution is a fixed point of S.  Because the system
is dissipative, S is a strict contraction in the energy metric once
iterates enter the absorbing ball, so Picard iteration converges; optional
Anderson (window least-squares) acceleration cuts the iteration count when
the contraction factor is close to one.

The absorbing-ball radius comes from the discrete Gronwall estimate: with
y = 2|v|^2 + |T|^2 + 2|rho|^2 and Phi(t) the forcing-plus-absorption
source, d/dt y <= -lam * y + Phi gives a ball of squared radius
int_period Phi / (1 - exp(-lam * period)), where lam is the smallest
nonzero decay rate of the linearized diffusion operators on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from . import fields as F
from . import diagnostics as diag
from .fields import State
from .physics import PhysicsParams, absorption_constant_sq, eval_forcing, coalbedo
from .stepper import (StepperConfig, Stepper, simulate, hydrostatic_tendency,
                      NumericsError, check_health)


ACCELERATIONS = ("picard", "anderson")
BALL_MODES = ("gronwall", "off")


@dataclass
class OrbitConfig:
    period: float = 1.0
    max_iters: int = 50
    tol: float = 1e-10
    acceleration: str = "picard"
    anderson_m: int = 3
    ball_radius_mode: str = "gronwall"

    def validation_errors(self) -> list[str]:
        errors = []
        if not (self.period > 0.0):
            errors.append(f"period must be positive, got {self.period}")
        if self.max_iters < 1:
            errors.append(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.tol > 0.0):
            errors.append(f"tol must be positive, got {self.tol}")
        if self.acceleration not in ACCELERATIONS:
            errors.append(
                f"acceleration must be one of {ACCELERATIONS}, "
                f"got {self.acceleration!r}")
        if self.anderson_m < 1:
            errors.append(f"anderson_m must be >= 1, got {self.anderson_m}")
        if self.ball_radius_mode not in BALL_MODES:
            errors.append(
                f"ball_radius_mode must be one of {BALL_MODES}, "
                f"got {self.ball_radius_mode!r}")
        return errors


@dataclass
class BallInfo:
    """Absorbing-ball certificate for the weighted energy y."""
    radius_sq: float
    lam: float
    phi_integral: float
    period: float


@dataclass
class OrbitResult:
    state: State
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    y_history: list = field(default_factory=list)
    ball: BallInfo | None = None
    energy_trace_final_period: "diag.EnergyTrace | None" = None
    failure: str | None = None

    @property
    def inside_ball(self) -> bool | None:
        if self.ball is None or not self.y_history:
            return None
        return bool(self.y_history[-1] <= self.ball.radius_sq)

    @property
    def all_inside_ball(self) -> bool | None:
        if self.ball is None or not self.y_history:
            return None
        return all(y <= self.ball.radius_sq for y in self.y_history)


def weighted_energy(grid: Grid, state: State) -> float:
    """y = 2|v|^2 + |T|^2 + 2|rho|^2, the Gronwall-weighted energy."""
    v_sq, T_sq, rho_sq = diag.state_norms_sq(grid, state)
    return 2.0 * v_sq + T_sq + 2.0 * rho_sq


def _state_dist(grid: Grid, a: State, b: State) -> float:
    dv = a.v - b.v
    return float(np.sqrt(
        diag.l2_sq_volume(grid, dv[0]) + diag.l2_sq_volume(grid, dv[1])
        + diag.l2_sq_volume(grid, a.T - b.T)
        + diag.l2_sq_surface(grid, a.rho - b.rho)))


def period_map(grid: Grid, state: State, forcing, params: PhysicsParams,
               stepper_cfg: StepperConfig, period: float) -> State:
    """Advance over one forcing period starting from t = 0.

    The state's own time is ignored: the map always integrates [0, period]
    so repeated applications are bitwise deterministic.  period must be an
    integer multiple of dt.
    """
    n_steps = int(round(period / stepper_cfg.dt))
    if n_steps < 1 or abs(period - n_steps * stepper_cfg.dt) > 1e-9 * period:
        raise ValueError(
            f"period {period} is not an integer multiple of dt {stepper_cfg.dt}")
    start = state.copy()
    start.t = 0.0
    stepper = Stepper(grid, params, forcing, stepper_cfg)
    current = start
    for _ in range(n_steps):
        current, _ = stepper.advance(current)
    current.t = 0.0
    return current


def decay_rate_floor(grid: Grid) -> float:
    """Smallest nonzero decay rate of the linearized diffusion.

    Candidates: the velocity Laplacian (periodic horizontal, vertical
    Neumann) and the temperature/surface block with its flux coupling,
    evaluated at horizontal wavenumber 0 and at the smallest nonzero one.
    Zero modes (constants, and the conserved vertical heat mode of the
    uncoupled-column block) are excluded.
    """
    nz, dz = grid.nz, grid.dz
    k2_min = (2.0 * np.pi) ** 2
    candidates = [k2_min, (2.0 / dz**2) * (1.0 - np.cos(np.pi / nz))]
    for k2 in (0.0, k2_min):
        rates = _coupled_block_rates(nz, dz, k2)
        candidates.extend(r for r in rates if r > 1e-10)
    return float(min(candidates))


def _coupled_block_rates(nz: int, dz: float, k2: float) -> np.ndarray:
    """Decay rates of the (T column, rho) diffusion block at one horizontal
    wavenumber, from the symmetrized dense matrix."""
    n = nz + 1
    A = np.zeros((n, n))
    inv2 = 1.0 / dz**2
    A[0, 0] = -inv2
    A[0, 1] = inv2
    for k in range(1, nz - 1):
        A[k, k - 1] = inv2
        A[k, k] = -2.0 * inv2
        A[k, k + 1] = inv2
    A[nz - 1, nz - 2] = inv2
    A[nz - 1, nz - 1] = -3.0 * inv2
    A[nz - 1, nz] = 2.0 * inv2
    A[nz, nz - 1] = 2.0 / dz
    A[nz, nz] = -2.0 / dz
    A -= k2 * np.eye(n)
    weights = np.full(n, dz)
    weights[-1] = 1.0
    sq = np.sqrt(weights)
    S = (sq[:, None] * A) / sq[None, :]
    return -np.linalg.eigvalsh(0.5 * (S + S.T))


def gronwall_ball_radius(grid: Grid, forcing, params: PhysicsParams,
                         period: float, n_samples: int = 256) -> BallInfo:
    """Absorbing-ball certificate from the period-averaged source.

    The source integral uses a uniform left-endpoint sum, which is exact
    for trigonometric forcing whose mode numbers are below n_samples.
    """
    c_sq = absorption_constant_sq(params)
    total = 0.0
    for j in range(n_samples):
        t = (j / n_samples) * period
        f1, f2, f3 = eval_forcing(forcing, t)
        total += (c_sq
                  + diag.l2_sq_volume(grid, f1[0]) + diag.l2_sq_volume(grid, f1[1])
                  + diag.l2_sq_volume(grid, f2)
                  + diag.l2_sq_surface(grid, f3))
    phi_integral = period * total / n_samples
    lam = decay_rate_floor(grid)
    radius_sq = float(phi_integral / (1.0 - np.exp(-lam * period)))
    return BallInfo(radius_sq=radius_sq, lam=lam,
                    phi_integral=phi_integral, period=period)


def find_periodic(grid: Grid, state0: State, forcing, params: PhysicsParams,
                  stepper_cfg: StepperConfig, orbit_cfg: OrbitConfig,
                  ball: BallInfo | None = None) -> OrbitResult:
    """Fixed point of the period map by Picard or Anderson iteration.

    The residual is the energy-metric distance between an iterate and its
    image; convergence means residual <= tol * max(1, |iterate|).
    Non-convergence and numerical failures inside the map are reported on
    the result (residual history preserved, failure message set), never
    raised, so amplitude sweeps always get a structured report.  On success
    the energy trace of one period from the fixed point is attached.
    """
    errors = orbit_cfg.validation_errors()
    if errors:
        raise ValueError("; ".join(errors))
    if ball is None and orbit_cfg.ball_radius_mode == "gronwall":
        ball = gronwall_ball_radius(grid, forcing, params, orbit_cfg.period)

    def pack(st: State) -> np.ndarray:
        return np.concatenate([st.v.ravel(), st.T.ravel(), st.rho.ravel()])

    def unpack(x: np.ndarray) -> State:
        g = grid
        nv = 2 * g.nx * g.ny * g.nz
        nT = g.nx * g.ny * g.nz
        v = x[:nv].reshape(2, g.nx, g.ny, g.nz).copy()
        T = x[nv:nv + nT].reshape(g.nx, g.ny, g.nz).copy()
        rho = x[nv + nT:].reshape(g.nx, g.ny).copy()
        return State(v=v, T=T, rho=rho, t=0.0)

    current = state0.copy()
    current.t = 0.0
    result = OrbitResult(state=current, converged=False, iterations=0,
                         ball=ball)
    f_hist: list[np.ndarray] = []
    g_hist: list[np.ndarray] = []
    for k in range(orbit_cfg.max_iters):
        result.y_history.append(weighted_energy(grid, current))
        try:
            mapped = period_map(grid, current, forcing, params, stepper_cfg,
                                orbit_cfg.period)
            check_health(grid, mapped, stepper_cfg.blowup_threshold)
        except NumericsError as exc:
            result.failure = str(exc)
            result.iterations = k + 1
            result.state = current
            return result
        r = _state_dist(grid, mapped, current)
        result.residual_history.append(r)
        result.iterations = k + 1
        scale = max(1.0, np.sqrt(sum(diag.state_norms_sq(grid, current))))
        if r <= orbit_cfg.tol * scale:
            result.state = mapped
            result.converged = True
            result.y_history.append(weighted_energy(grid, mapped))
            _, trace = simulate(grid, mapped, forcing, params, stepper_cfg,
                                mapped.t + orbit_cfg.period)
            result.energy_trace_final_period = trace
            return result
        if orbit_cfg.acceleration == "anderson":
            x_k = pack(current)
            g_k = pack(mapped)
            f_hist.append(g_k - x_k)
            g_hist.append(g_k)
            m = min(orbit_cfg.anderson_m, len(f_hist) - 1)
            if m >= 1:
                dF = np.stack([f_hist[-1] - f_hist[-2 - i]
                               for i in range(m)], axis=1)
                dG = np.stack([g_hist[-1] - g_hist[-2 - i]
                               for i in range(m)], axis=1)
                gamma, *_ = np.linalg.lstsq(dF, f_hist[-1], rcond=None)
                correction = dG @ gamma
                # trust cap: when consecutive iterates are nearly stationary
                # the extrapolation leaps far beyond the picard displacement
                # and can leave the reaction guard's stability region, so the
                # leap is damped to a bounded multiple of that displacement
                cap = 10.0 * float(np.linalg.norm(f_hist[-1]))
                nrm = float(np.linalg.norm(correction))
                if nrm > cap:
                    correction *= cap / nrm
                current = unpack(g_k - correction)
            else:
                current = mapped
        else:
            current = mapped
    result.state = current
    return result


@dataclass
class SteadyResult:
    state: State
    converged: bool
    rate: float
    rate_history: list = field(default_factory=list)
    residual_norms: dict = field(default_factory=dict)
    time_integrated: float = 0.0


def steady_residual_norms(grid: Grid, state: State, forcing,
                          params: PhysicsParams) -> dict:
    """L2 norms of the steady equations' residual at the given state.

    The velocity residual is projected (the surface-pressure gradient
    absorbs the complementary part); the surface residual measures the
    boundary flux with the one-sided second-order reporting stencil.
    """
    f1, f2, f3 = eval_forcing(forcing, state.t)
    w = F.compute_w(grid, state.v)
    vbar = F.vertical_average(grid, state.v)
    res_v = (-F.advection_v(grid, state.v, w)
             + hydrostatic_tendency(grid, state.T)
             + f1 + F.laplacian_v(grid, state.v))
    res_v = F.project_barotropic(grid, res_v)
    res_T = (-F.advection_T(grid, state.v, w, state.T, state.rho)
             + F.laplacian_T(grid, state.T, state.rho) + f2)
    reaction = params.Q * coalbedo(state.rho, params) \
        - np.abs(state.rho) ** 3 * state.rho
    res_rho = (-F.advection_rho(grid, vbar, state.rho)
               + grid.laplacian_h(state.rho)
               - F.surface_flux(grid, state.T, state.rho)
               + reaction + f3)
    return dict(
        v=float(np.sqrt(diag.l2_sq_volume(grid, res_v[0])
                        + diag.l2_sq_volume(grid, res_v[1]))),
        T=float(np.sqrt(diag.l2_sq_volume(grid, res_T))),
        rho=float(np.sqrt(diag.l2_sq_surface(grid, res_rho))),
    )


def find_steady_state(grid: Grid, state0: State, forcing,
                      params: PhysicsParams, stepper_cfg: StepperConfig,
                      tol: float = 1e-8, chunk_time: float = 0.5,
                      max_chunks: int = 200) -> SteadyResult:
    """March to a steady state under time-constant forcing.

    Integrates in chunks and stops when the state's rate of change
    |X(t + chunk) - X(t)| / chunk drops below tol.  The returned residual
    norms evaluate the steady equations directly at the final state.
    """
    n_steps = int(round(chunk_time / stepper_cfg.dt))
    if n_steps < 1 or abs(chunk_time - n_steps * stepper_cfg.dt) > 1e-9 * chunk_time:
        raise ValueError(
            f"chunk_time {chunk_time} is not an integer multiple of "
            f"dt {stepper_cfg.dt}")
    stepper = Stepper(grid, params, forcing, stepper_cfg)
    current = state0.copy()
    result = SteadyResult(state=current, converged=False, rate=np.inf)
    for _ in range(max_chunks):
        mark = current.copy()
        for _ in range(n_steps):
            current, _ = stepper.advance(current)
        check_health(grid, current, stepper_cfg.blowup_threshold)
        rate = _state_dist(grid, current, mark) / chunk_time
        result.rate_history.append(rate)
        result.time_integrated += chunk_time
        result.rate = rate
        if rate <= tol:
            result.converged = True
            break
    result.state = current
    result.residual_norms = steady_residual_norms(grid, current, forcing,
                                                  params)
    return result
