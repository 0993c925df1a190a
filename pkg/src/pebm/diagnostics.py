"""Discrete norms, energy bookkeeping, and the analysis certificates.

Quadrature conventions: volume integrals use the midpoint weights
dx dy dz over cell centers, surface integrals use dx dy.  Horizontal
gradient energies are evaluated spectrally (Parseval), vertical gradient
energies on cell faces; the temperature gradient energy includes the
half-cell boundary term 2 (rho - T_top)^2 / dz, which is exactly the
dissipation produced by the coupled implicit operator, so the discrete
energy identity holds with the scheme-order defect only.

The energy trace records, per accepted step, both instantaneous values
(norms, work terms, forcing norms) and the scheme-consistent integral
increments of dissipation, work and the quintic sink.  The energy-inequality
residual sums those increments; composite trapezoid sums of the pointwise
columns would bury the scheme defect under quadrature error of size
O(dt^2 * lambda^2) even for exact trajectories, which is far above the
tolerances this residual is held to.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .fields import State
from .physics import PhysicsParams, coalbedo, reaction


# ----------------------------------------------------------------------
# norms


def _dbl_weights(grid: Grid) -> np.ndarray:
    """Multiplicity of each half-spectrum mode in the full spectrum."""
    w = np.full(grid.ny // 2 + 1, 2.0)
    w[0] = 1.0
    if grid.ny % 2 == 0:
        w[-1] = 1.0
    return w


def l2_sq_volume(grid: Grid, f: np.ndarray) -> float:
    """Squared L2 norm over the box; sums leading component axes if any."""
    return float(np.sum(f * f)) / (grid.nx * grid.ny * grid.nz)


def l2_sq_surface(grid: Grid, f: np.ndarray) -> float:
    return float(np.sum(f * f)) / (grid.nx * grid.ny)


def l1_surface(grid: Grid, f: np.ndarray) -> float:
    return float(np.sum(np.abs(f))) / (grid.nx * grid.ny)


def l5_pow5_surface(grid: Grid, rho: np.ndarray) -> float:
    """Fifth power of the surface L5 norm (pointwise |rho|^5, midpoint sum)."""
    return float(np.sum(np.abs(rho) ** 5)) / (grid.nx * grid.ny)


def _horiz_grad_sq(grid: Grid, f: np.ndarray) -> float:
    """Sum |grad_H f|^2 with the volume/surface weight of f's shape."""
    spec = grid.fft_h(f)
    k2 = grid._hshape(grid.k2_deriv * _dbl_weights(grid)[None, :], f)
    total = float(np.sum(k2 * (spec.real**2 + spec.imag**2)))
    if f.ndim == 3:
        total /= grid.nz
    return total


def grad_sq_rho(grid: Grid, rho: np.ndarray) -> float:
    """Squared surface H1 seminorm of rho (spectral)."""
    return _horiz_grad_sq(grid, rho)


def grad_sq_v(grid: Grid, v: np.ndarray) -> float:
    """Squared gradient energy of v: spectral horizontal plus interior
    vertical faces (Neumann walls contribute nothing)."""
    total = _horiz_grad_sq(grid, v[0]) + _horiz_grad_sq(grid, v[1])
    dz = grid.dz
    dv = np.diff(v, axis=3) / dz
    total += float(np.sum(dv * dv)) * dz / (grid.nx * grid.ny)
    return total

def grad_sq_T(grid: Grid, T: np.ndarray, rho: np.ndarray) -> float:
    """Squared gradient energy of T including the half-cell boundary face
    (rho - T_top) term; exactly the dissipation of the coupled operator."""
    total = _horiz_grad_sq(grid, T)
    dz = grid.dz
    dT = np.diff(T, axis=2) / dz
    total += float(np.sum(dT * dT)) * dz / (grid.nx * grid.ny)
    bnd = rho - T[..., -1]
    total += 2.0 / dz * float(np.sum(bnd * bnd)) / (grid.nx * grid.ny)
    return total


def h1_sq_volume(grid: Grid, f: np.ndarray) -> float:
    """L2 + gradient energy with Neumann-style vertical faces (no boundary
    term); for velocity components and strong-solution weights."""
    total = l2_sq_volume(grid, f) + _horiz_grad_sq(grid, f)
    dz = grid.dz
    df = np.diff(f, axis=-1) / dz
    total += float(np.sum(df * df)) * dz / (grid.nx * grid.ny)
    return total


def state_norms_sq(grid: Grid, state: State) -> tuple[float, float, float]:
    return (l2_sq_volume(grid, state.v),
            l2_sq_volume(grid, state.T),
            l2_sq_surface(grid, state.rho))


def inner_volume(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b)) / (grid.nx * grid.ny * grid.nz)


def inner_surface(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b)) / (grid.nx * grid.ny)


# ----------------------------------------------------------------------
# traces


ENERGY_COLUMNS = (
    "t", "v_sq", "T_sq", "rho_sq",
    "grad_v_sq", "grad_T_sq", "grad_rho_sq", "rho_l5",
    "work_v", "work_T", "work_rho",
    "f1_sq", "f2_sq", "f3_sq",
    "diss_inc", "work_inc", "sink_inc", "div_max",
)

DIFFERENCE_COLUMNS = (
    "t", "sigma_v_sq", "sigma_T_sq", "sigma_rho_sq",
    "sigma_grad_sq", "g_weight",
)


class _Trace:
    """Column-oriented record of per-step scalars with CSV round trip."""

    columns: tuple[str, ...] = ()

    def __init__(self):
        self._rows: list[tuple[float, ...]] = []

    def append(self, **values: float) -> None:
        missing = set(self.columns) - set(values)
        extra = set(values) - set(self.columns)
        if missing or extra:
            raise ValueError(f"bad trace row: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        self._rows.append(tuple(float(values[c]) for c in self.columns))

    def __len__(self) -> int:
        return len(self._rows)

    def __getitem__(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self._rows])

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self._rows:
                writer.writerow([repr(x) for x in row])

    @classmethod
    def from_csv(cls, path) -> "_Trace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != cls.columns:
                raise ValueError(
                    f"unexpected columns {header}, need {list(cls.columns)}")
            trace = cls()
            for row in reader:
                if len(row) != len(cls.columns):
                    raise ValueError(f"row has {len(row)} fields, "
                                     f"expected {len(cls.columns)}")
                trace._rows.append(tuple(float(x) for x in row))
        return trace


class EnergyTrace(_Trace):
    columns = ENERGY_COLUMNS

    def sum_sq(self) -> np.ndarray:
        return self["v_sq"] + self["T_sq"] + self["rho_sq"]


class DifferenceTrace(_Trace):
    columns = DIFFERENCE_COLUMNS

    def sigma_sq(self) -> np.ndarray:
        return (self["sigma_v_sq"] + self["sigma_T_sq"]
                + self["sigma_rho_sq"])


def instantaneous_energy_row(grid: Grid, state: State, f1: np.ndarray,
                             f2: np.ndarray, f3: np.ndarray,
                             params: PhysicsParams,
                             theta_grad: tuple[np.ndarray, np.ndarray],
                             div_max: float) -> dict:
    """Pointwise-in-time columns of the energy trace (increments excluded)."""
    v_sq, T_sq, rho_sq = state_norms_sq(grid, state)
    gx, gy = theta_grad
    work_v = inner_volume(grid, f1[0] + gx, state.v[0]) \
        + inner_volume(grid, f1[1] + gy, state.v[1])
    work_T = inner_volume(grid, f2, state.T)
    work_rho = inner_surface(
        grid, f3 + params.Q * coalbedo(state.rho, params), state.rho)
    return dict(
        t=state.t, v_sq=v_sq, T_sq=T_sq, rho_sq=rho_sq,
        grad_v_sq=grad_sq_v(grid, state.v),
        grad_T_sq=grad_sq_T(grid, state.T, state.rho),
        grad_rho_sq=grad_sq_rho(grid, state.rho),
        rho_l5=l5_pow5_surface(grid, state.rho),
        work_v=work_v, work_T=work_T, work_rho=work_rho,
        f1_sq=l2_sq_volume(grid, f1),
        f2_sq=l2_sq_volume(grid, f2),
        f3_sq=l2_sq_surface(grid, f3),
        div_max=div_max,
    )


# ----------------------------------------------------------------------
# energy inequality


def _locate(times: np.ndarray, t: float) -> int:
    tol = 1e-9 * max(1.0, abs(t))
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > tol:
        raise ValueError(f"time {t} is not a record in the trace "
                         f"(range {times[0]}..{times[-1]})")
    return idx


def energy_inequality_residual(trace: EnergyTrace, s: float, t: float) -> float:
    """Residual of the energy inequality over [s, t]: positive means the
    inequality is violated by that amount.

    residual = (sum of squares at t) - (at s)
               + 2 * (dissipation + quintic sink integrals)
               - 2 * (work integrals),

    with the integrals taken from the per-step scheme-consistent increments
    (each increment is the step's own quadrature of its interval, so the sum
    over [s, t] is the composite rule over the subinterval and residuals add
    exactly across adjacent subintervals).
    """
    times = trace.t
    i = _locate(times, s)
    j = _locate(times, t)
    if j < i:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    sums = trace.sum_sq()
    seg = slice(i + 1, j + 1)
    diss = float(np.sum(trace["diss_inc"][seg]))
    sink = float(np.sum(trace["sink_inc"][seg]))
    work = float(np.sum(trace["work_inc"][seg]))
    return (sums[j] - sums[i]) + 2.0 * (diss + sink) - 2.0 * work


def max_subinterval_residual(trace: EnergyTrace) -> float:
    """max over all record pairs s <= t of the inequality residual, O(n)."""
    sums = trace.sum_sq()
    inc = 2.0 * (trace["diss_inc"] + trace["sink_inc"] - trace["work_inc"])
    # F[j] with residual(i, j) = F[j] - F[i]
    f = sums + np.concatenate([[0.0], np.cumsum(inc[1:])])
    running_min = np.minimum.accumulate(f)
    return float(np.max(f - running_min))


# ----------------------------------------------------------------------
# a-priori envelope


@dataclass
class EnvelopeCheck:
    max_violation: float
    max_relative_violation: float
    t_at_max: float


def gronwall_envelope_check(trace: EnergyTrace, c_sq: float) -> EnvelopeCheck:
    """Check y(t) <= e^{t - t0} (y(t0) + int_{t0}^t Phi) along the trace,
    with y = 2||v||^2 + ||T||^2 + 2||rho||^2 and
    Phi = C^2 + ||f1||^2 + ||f2||^2 + ||f3||^2.

    Returns the largest signed violation y - envelope (negative everywhere
    means the envelope holds) and the same scaled by the envelope.
    """
    t = trace.t
    y = 2.0 * trace["v_sq"] + trace["T_sq"] + 2.0 * trace["rho_sq"]
    phi = c_sq + trace["f1_sq"] + trace["f2_sq"] + trace["f3_sq"]
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (phi[1:] + phi[:-1]) * np.diff(t))])
    env = np.exp(t - t[0]) * (y[0] + cum)
    viol = y - env
    scale = np.maximum(env, 1e-300)
    k = int(np.argmax(viol))
    return EnvelopeCheck(
        max_violation=float(viol[k]),
        max_relative_violation=float(np.max(viol / scale)),
        t_at_max=float(t[k]),
    )


# ----------------------------------------------------------------------
# weak-strong uniqueness certificate


@dataclass
class ContractionCertificate:
    """Fitted Gronwall contraction data for a pair of runs."""

    bitwise_identical: bool
    sigma0_sq: float
    sigma_final_sq: float
    g_integral: float
    c_fit: float
    holds: bool

    def to_text(self, path) -> None:
        with open(path, "w") as fh:
            for key in ("bitwise_identical", "sigma0_sq", "sigma_final_sq",
                        "g_integral", "c_fit", "holds"):
                fh.write(f"{key}: {getattr(self, key)!r}\n")


def difference_row(grid: Grid, s1: State, s2: State) -> dict:
    """One DifferenceTrace row: difference norms plus the strong-solution
    Gronwall weight g(s) = ||v2||_H1^4 + ||T2||_H1^4 + ||rho2||_H1^4."""
    dv = s1.v - s2.v
    dT = s1.T - s2.T
    drho = s1.rho - s2.rho
    g = (h1_sq_volume(grid, s2.v[0]) + h1_sq_volume(grid, s2.v[1])) ** 2 \
        + (l2_sq_volume(grid, s2.T) + grad_sq_T(grid, s2.T, s2.rho)) ** 2 \
        + (l2_sq_surface(grid, s2.rho) + grad_sq_rho(grid, s2.rho)) ** 2
    return dict(
        t=s1.t,
        sigma_v_sq=l2_sq_volume(grid, dv),
        sigma_T_sq=l2_sq_volume(grid, dT),
        sigma_rho_sq=l2_sq_surface(grid, drho),
        sigma_grad_sq=(grad_sq_v(grid, dv) + grad_sq_T(grid, dT, drho)
                       + grad_sq_rho(grid, drho)),
        g_weight=g,
    )


def weak_strong_contraction(grid: Grid, traj1, traj2) -> tuple[DifferenceTrace, ContractionCertificate]:
    """Consume two lockstep state trajectories (iterables of State at the
    same instants) and certify log ||sigma(t)||^2 - log ||sigma(t0)||^2
    <= C_fit * int g(s) ds with the reported (fitted) C_fit.

    For bitwise-identical trajectories sigma is exactly zero and the
    certificate records that instead of a fit.
    """
    trace = DifferenceTrace()
    for s1, s2 in zip(traj1, traj2):
        if abs(s1.t - s2.t) > 1e-12 * max(1.0, abs(s1.t)):
            raise ValueError(f"trajectories out of step: {s1.t} vs {s2.t}")
        trace.append(**difference_row(grid, s1, s2))
    if len(trace) < 2:
        raise ValueError("need at least two lockstep records")

    t = trace.t
    sig = trace.sigma_sq()
    g = trace["g_weight"]
    g_cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    if np.all(sig == 0.0):
        cert = ContractionCertificate(
            bitwise_identical=True, sigma0_sq=0.0, sigma_final_sq=0.0,
            g_integral=float(g_cum[-1]), c_fit=0.0, holds=True)
        return trace, cert
    if sig[0] == 0.0 or np.any(sig == 0.0):
        raise ValueError("difference norm hit zero on a non-identical pair; "
                         "cannot fit a log-contraction constant")
    log_ratio = np.log(sig / sig[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = log_ratio[1:] / g_cum[1:]
    c_fit = float(np.max(ratios))
    holds = bool(np.isfinite(c_fit))
    cert = ContractionCertificate(
        bitwise_identical=False,
        sigma0_sq=float(sig[0]),
        sigma_final_sq=float(sig[-1]),
        g_integral=float(g_cum[-1]),
        c_fit=c_fit,
        holds=holds,
    )
    return trace, cert


def reaction_work_bound(grid: Grid, rho1: np.ndarray, rho2: np.ndarray,
                        params: PhysicsParams) -> tuple[float, float]:
    """Cross reaction work |int R(x,rho1) rho2 + R(x,rho2) rho1| and its
    explicit majorant C * (||rho1||_5^5 + ||rho2||_5^5 + ||rho1||_1
    + ||rho2||_1) with C = max(1, Q_max beta2).

    Derivation: |coalbedo| <= beta2 bounds the insolation part by
    Q_max beta2 (||rho1||_1 + ||rho2||_1); pointwise Young
    |a|^4 |b| <= (4/5)|a|^5 + (1/5)|b|^5 bounds the quintic cross terms by
    ||rho1||_5^5 + ||rho2||_5^5.
    """
    lhs = abs(inner_surface(grid, reaction(rho1, params), rho2)
              + inner_surface(grid, reaction(rho2, params), rho1))
    c = max(1.0, float(np.max(params.Q)) * params.beta2)
    rhs = c * (l5_pow5_surface(grid, rho1) + l5_pow5_surface(grid, rho2)
               + l1_surface(grid, rho1) + l1_surface(grid, rho2))
    return lhs, rhs
