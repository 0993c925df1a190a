"""Time stepping: modal decay oracles, conservation, guards, and the
simulate driver contract.
"""

import math

import numpy as np
import pytest

import pebm.diagnostics as diag
import pebm.fields as F
from pebm.fields import State, random_state, zeros_state
from pebm.grid import make_grid
from pebm.physics import (
    ForcingMode,
    ModeForcing,
    PhysicsParams,
    zero_forcing,
)
from pebm.stepper import (
    BlowUpError,
    NumericsError,
    ReactionGuardError,
    Stepper,
    StepperConfig,
    check_health,
    hydrostatic_tendency,
    iterate_states,
    simulate,
    step,
)


def quiet_params(grid, q0=0.0):
    Q = np.full((grid.nx, grid.ny), q0)
    return PhysicsParams(beta1=0.32, beta2=0.68, rho_ref=0.0, Q=Q)


def single_mode_v_state(grid):
    """vx = sin(2 pi y), z-uniform: divergence free, eigenfunction of the
    horizontal Laplacian with eigenvalue 4 pi^2, untouched by projection."""
    s = zeros_state(grid)
    s.v[0] = np.sin(2.0 * np.pi * grid.y)[None, :, None] \
        * np.ones((grid.nx, 1, grid.nz))
    return s


# ----------------------------------------------------------------------
# modal decay oracles


def test_euler_modal_decay_factor(grid16):
    dt = 0.01
    lam = 4.0 * math.pi ** 2
    cfg = StepperConfig(scheme="imex-euler", dt=dt)
    st = Stepper(grid16, quiet_params(grid16), zero_forcing(grid16), cfg)
    state = single_mode_v_state(grid16)
    amp0 = float(state.v[0, 0, 4, 0]) / math.sin(2.0 * math.pi * grid16.y[4])
    for n in range(1, 21):
        state, _ = st.advance(state)
        expected = amp0 / (1.0 + dt * lam) ** n
        got = float(state.v[0, 0, 4, 0]) / math.sin(2.0 * math.pi * grid16.y[4])
        assert got == pytest.approx(expected, rel=1e-12)
        assert not state.v[1].any()
        assert not state.T.any() and not state.rho.any()


def test_cnab2_modal_decay_factor(grid16):
    # first step has no multistep history and is a full backward-Euler step;
    # every later step applies the trapezoidal one-step factor.
    dt = 0.01
    lam = 4.0 * math.pi ** 2
    cfg = StepperConfig(scheme="imex-cnab2", dt=dt)
    st = Stepper(grid16, quiet_params(grid16), zero_forcing(grid16), cfg)
    state = single_mode_v_state(grid16)
    amp0 = float(state.v[0, 0, 4, 0]) / math.sin(2.0 * math.pi * grid16.y[4])
    euler = 1.0 / (1.0 + dt * lam)
    cn = (1.0 - 0.5 * dt * lam) / (1.0 + 0.5 * dt * lam)
    for n in range(1, 21):
        state, _ = st.advance(state)
        expected = amp0 * euler * cn ** (n - 1)
        got = float(state.v[0, 0, 4, 0]) / math.sin(2.0 * math.pi * grid16.y[4])
        assert got == pytest.approx(expected, rel=1e-12)


def test_hydrostatic_tendency_oracle(grid16):
    # T = cos(2 pi x) g(z) gives the pressure-gradient tendency
    # (-2 pi sin(2 pi x) G(z), 0) with G the midpoint cumulative of g.
    gz = np.cos(np.pi * grid16.z_centers) + 0.5
    T = np.cos(2.0 * np.pi * grid16.x)[:, None, None] \
        * np.ones((1, grid16.ny, 1)) * gz[None, None, :]
    G = grid16.dz * (np.cumsum(gz) - 0.5 * gz)
    expected_x = -2.0 * np.pi * np.sin(2.0 * np.pi * grid16.x)[:, None, None] \
        * np.ones((1, grid16.ny, 1)) * G[None, None, :]
    pt = hydrostatic_tendency(grid16, T)
    np.testing.assert_allclose(pt[0], expected_x, atol=1e-13)
    np.testing.assert_allclose(pt[1], 0.0, atol=1e-13)


def test_gradient_forcing_lands_in_surface_pressure(grid16):
    # A purely irrotational, z-uniform body force cannot accelerate the
    # constrained velocity; it must be absorbed by the recorded surface
    # pressure q / dt instead.
    dt = 1e-3
    amp = 0.7

    def fn(t):
        f1 = np.zeros((2, grid16.nx, grid16.ny, grid16.nz))
        f1[0] = amp * np.cos(2.0 * np.pi * grid16.x)[:, None, None]
        return f1, np.zeros((grid16.nx, grid16.ny, grid16.nz)), \
            np.zeros((grid16.nx, grid16.ny))

    from pebm.physics import CallableForcing
    cfg = StepperConfig(scheme="imex-euler", dt=dt)
    st = Stepper(grid16, quiet_params(grid16), CallableForcing(1.0, fn), cfg)
    new, _ = st.advance(zeros_state(grid16))
    assert float(np.max(np.abs(new.v))) < 1e-14
    lam = 4.0 * math.pi ** 2
    expected_ps = amp * np.sin(2.0 * np.pi * grid16.x)[:, None] \
        / (2.0 * np.pi * (1.0 + dt * lam)) * np.ones((1, grid16.ny))
    np.testing.assert_allclose(st.last_p_s, expected_ps, atol=1e-13)


# ----------------------------------------------------------------------
# conservation and monotonicity


@pytest.mark.parametrize("scheme", ["imex-euler", "imex-cnab2"])
def test_linear_column_heat_conserved(grid16, rng, scheme):
    # With advection, reaction, and forcing off, the coupled (T, rho)
    # diffusion conserves the total column heat dz * sum_z mean(T) + mean(rho)
    # exactly (the horizontal mean sits in the flux-conservative vertical
    # block's null functional).
    cfg = StepperConfig(scheme=scheme, dt=5e-3, linear_only=True)
    st = Stepper(grid16, quiet_params(grid16), zero_forcing(grid16), cfg)
    state = random_state(grid16, rng)

    def heat(s):
        return grid16.dz * float(np.sum(np.mean(s.T, axis=(0, 1)))) \
            + float(np.mean(s.rho))

    h0 = heat(state)
    for _ in range(50):
        state, _ = st.advance(state)
    assert heat(state) == pytest.approx(h0, abs=1e-13)
    # and the fields really moved
    assert abs(float(np.max(state.T)) ) != pytest.approx(0.0, abs=1e-6)


def test_euler_free_decay_audit_is_dissipative(grid16, rng):
    # backward Euler free decay: every subinterval of the energy identity
    # closes with a nonpositive residual (extra numerical dissipation only).
    cfg = StepperConfig(scheme="imex-euler", dt=2e-3)
    state = random_state(grid16, rng, amplitude=0.5)
    final, trace = simulate(grid16, state, zero_forcing(grid16),
                            quiet_params(grid16), cfg, t_end=0.2)
    e0 = trace.sum_sq()[0]
    assert diag.max_subinterval_residual(trace) <= 1e-12 * e0
    sums = trace.sum_sq()
    assert np.all(np.diff(sums) < 0.0)          # strict monotone decay
    assert sums[-1] < 0.2 * sums[0]             # actually decays


def test_cnab2_free_decay_audit_is_second_order_accurate(grid16, rng):
    # Start from data whose stiff transients have been damped, so the
    # multistep extrapolation error is in its asymptotic range.  The
    # inequality direction (violation <= 0) holds regardless; the signed
    # whole-run defect halves-squared with dt.
    raw = random_state(grid16, rng, amplitude=0.5)
    pre, _ = simulate(grid16, raw, zero_forcing(grid16), quiet_params(grid16),
                      StepperConfig(scheme="imex-euler", dt=1e-3), t_end=0.05)
    pre.t = 0.0
    e0 = sum(diag.state_norms_sq(grid16, pre))
    resids = {}
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = StepperConfig(scheme="imex-cnab2", dt=dt)
        _, trace = simulate(grid16, pre.copy(), zero_forcing(grid16),
                            quiet_params(grid16), cfg, t_end=0.2)
        assert diag.max_subinterval_residual(trace) <= 1e-9 * e0
        resids[dt] = abs(diag.energy_inequality_residual(trace, 0.0, 0.2))
    # halving dt divides the signed defect by ~4
    assert resids[4e-3] / resids[2e-3] > 3.0
    assert resids[2e-3] / resids[1e-3] > 3.0


# ----------------------------------------------------------------------
# guards


def test_reaction_guard_trips(grid8):
    cfg = StepperConfig(scheme="imex-euler", dt=0.01)
    st = Stepper(grid8, quiet_params(grid8), zero_forcing(grid8), cfg)
    state = zeros_state(grid8)
    state.rho[:] = 3.0          # dt * 4 * 27 = 1.08 >= 1
    with pytest.raises(ReactionGuardError, match="guard"):
        st.advance(state)
    # linear-only runs skip the guard
    cfg2 = StepperConfig(scheme="imex-euler", dt=0.01, linear_only=True)
    st2 = Stepper(grid8, quiet_params(grid8), zero_forcing(grid8), cfg2)
    st2.advance(state)


def test_check_health_nan_and_blowup(grid8):
    state = zeros_state(grid8)
    check_health(grid8, state, threshold=1.0)
    state.T[0, 0, 0] = np.nan
    with pytest.raises(NumericsError, match="NaN"):
        check_health(grid8, state, threshold=1.0)
    state.T[0, 0, 0] = 0.0
    state.rho[:] = 50.0
    with pytest.raises(BlowUpError, match="blow-up"):
        check_health(grid8, state, threshold=10.0)


def test_simulate_blowup_attaches_partial_trace(grid16, rng):
    state = random_state(grid16, rng, amplitude=1.0)
    cfg = StepperConfig(scheme="imex-euler", dt=1e-3, blowup_threshold=1e-6)
    with pytest.raises(BlowUpError) as info:
        simulate(grid16, state, zero_forcing(grid16), quiet_params(grid16),
                 cfg, t_end=0.05)
    partial = info.value.partial_trace
    assert len(partial) >= 1
    assert partial.t[0] == 0.0


# ----------------------------------------------------------------------
# simulate driver contract


def test_simulate_validations(grid8, rng):
    state = random_state(grid8, rng)
    cfg = StepperConfig(scheme="imex-euler", dt=2e-3)
    fr = zero_forcing(grid8)
    p = quiet_params(grid8)
    with pytest.raises(ValueError, match="multiple"):
        simulate(grid8, state, fr, p, cfg, t_end=0.0105)
    with pytest.raises(ValueError, match="multiple"):
        simulate(grid8, state, fr, p, cfg, t_end=-0.01)


def test_simulate_zero_span(grid8, rng):
    state = random_state(grid8, rng)
    cfg = StepperConfig(scheme="imex-euler", dt=2e-3)
    final, trace = simulate(grid8, state, zero_forcing(grid8),
                            quiet_params(grid8), cfg, t_end=0.0)
    assert len(trace) == 1
    assert trace["diss_inc"][0] == 0.0
    assert np.array_equal(final.v, state.v)
    assert final is not state                   # a defensive copy


def test_simulate_observer_contract(grid8, rng):
    state = random_state(grid8, rng, amplitude=0.1)
    cfg = StepperConfig(scheme="imex-euler", dt=2e-3)
    seen = []

    def obs(s, row):
        seen.append((s.t, row["t"], row["v_sq"]))

    final, trace = simulate(grid8, state, zero_forcing(grid8),
                            quiet_params(grid8), cfg, t_end=0.01,
                            observers=(obs,))
    assert len(seen) == 5                       # once per accepted step
    assert len(trace) == 6                      # includes the initial record
    for k, (st_t, row_t, _) in enumerate(seen, start=1):
        assert st_t == row_t == pytest.approx(k * 2e-3, abs=1e-15)
    # first row carries zero increments; later rows carry the step's own
    assert trace["diss_inc"][0] == 0.0
    assert np.all(trace["diss_inc"][1:] > 0.0)


def test_simulate_bitwise_deterministic(grid16):
    rng = np.random.default_rng(7)
    state = random_state(grid16, rng, amplitude=0.3)
    fr = ModeForcing(grid16, 0.2,
                     [ForcingMode("f2", 0.05, "cos", 1, "cos", 1, 0)])
    p = quiet_params(grid16, q0=1.0)
    cfg = StepperConfig(scheme="imex-cnab2", dt=1e-3)
    f1, tr1 = simulate(grid16, state.copy(), fr, p, cfg, t_end=0.05)
    f2, tr2 = simulate(grid16, state.copy(), fr, p, cfg, t_end=0.05)
    assert np.array_equal(f1.v, f2.v)
    assert np.array_equal(f1.T, f2.T)
    assert np.array_equal(f1.rho, f2.rho)
    for col in tr1.columns:
        assert np.array_equal(tr1[col], tr2[col])


def test_step_matches_stepper_advance(grid8, rng):
    state = random_state(grid8, rng, amplitude=0.2)
    cfg = StepperConfig(scheme="imex-euler", dt=1e-3)
    p = quiet_params(grid8, q0=1.0)
    fr = zero_forcing(grid8)
    via_fn = step(grid8, state, fr, p, cfg)
    via_obj, _ = Stepper(grid8, p, fr, cfg).advance(state)
    assert np.array_equal(via_fn.v, via_obj.v)
    assert np.array_equal(via_fn.T, via_obj.T)
    assert np.array_equal(via_fn.rho, via_obj.rho)
    assert via_fn.t == 1e-3


def test_iterate_states_matches_simulate(grid8, rng):
    state = random_state(grid8, rng, amplitude=0.2)
    cfg = StepperConfig(scheme="imex-cnab2", dt=1e-3)
    p = quiet_params(grid8, q0=1.0)
    fr = zero_forcing(grid8)
    states = list(iterate_states(grid8, state, fr, p, cfg, n_steps=10))
    assert len(states) == 11
    assert states[0].t == 0.0
    final, _ = simulate(grid8, state, fr, p, cfg, t_end=0.01)
    assert np.array_equal(states[-1].v, final.v)
    assert np.array_equal(states[-1].T, final.T)
    # yielded states are copies: mutating one does not corrupt the run
    states2 = iterate_states(grid8, state, fr, p, cfg, n_steps=2)
    first = next(states2)
    first.T[:] = 1e9
    second = next(states2)
    assert float(np.max(np.abs(second.T))) < 1.0


def test_stepper_config_validation(grid8):
    msgs = StepperConfig(scheme="rk4", dt=-1.0,
                         blowup_threshold=0.0).validation_errors()
    assert len(msgs) == 3
    with pytest.raises(ValueError, match="scheme"):
        Stepper(grid8, quiet_params(grid8), zero_forcing(grid8),
                StepperConfig(scheme="rk4", dt=1e-3))
    with pytest.raises(ValueError, match="dt"):
        Stepper(grid8, quiet_params(grid8), zero_forcing(grid8),
                StepperConfig(scheme="imex-euler", dt=0.0))


def test_divergence_free_after_forced_steps(grid16, rng):
    # the projection keeps the vertically averaged velocity divergence-free
    # after every step of a forced nonlinear run
    state = random_state(grid16, rng, amplitude=0.3)
    fr = ModeForcing(grid16, 0.2, [
        ForcingMode("f1x", 0.05, "sin", 1, "sin", 0, 1),
        ForcingMode("f2", 0.05, "cos", 1, "cos", 1, 0),
        ForcingMode("f3", 0.02, "sin", 1, "sin", 1, 1),
    ])
    p = quiet_params(grid16, q0=1.0)
    cfg = StepperConfig(scheme="imex-cnab2", dt=1e-3)
    _, trace = simulate(grid16, state, fr, p, cfg, t_end=0.05)
    assert float(np.max(trace["div_max"])) < 1e-11


def test_surface_trace_stays_consistent(grid16, rng):
    # T's reconstructed top trace follows rho closely once diffusion has
    # smoothed the initial data (the coupling flux drives them together).
    state = random_state(grid16, rng, amplitude=0.3)
    fr = ModeForcing(grid16, 0.2,
                     [ForcingMode("f2", 0.05, "cos", 1, "cos", 1, 0)])
    p = quiet_params(grid16, q0=1.0)
    cfg = StepperConfig(scheme="imex-cnab2", dt=1e-3)
    final, _ = simulate(grid16, state, fr, p, cfg, t_end=0.2)
    gap = float(np.max(np.abs(F.trace_top(grid16, final.T) - final.rho)))
    assert gap < 0.05
