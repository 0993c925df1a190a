"""Prognostic state and discrete spatial operators.

The state is (v, T, rho): horizontal velocity v(x,y,z) with two components,
interior temperature T(x,y,z), and the surface temperature rho(x,y) acting as
a dynamic Dirichlet value for T at the upper boundary z = 1.

Vertical boundary closures (cell-centered grid, ghost cells):
  * bottom z = 0: reflection ghost (homogeneous Neumann) for v and T,
  * top z = 1 for v: reflection ghost (Neumann),
  * top z = 1 for T: ghost chosen so the linearly interpolated trace at z = 1
    equals rho, i.e. ghost = 2 rho - T_top.

Advection uses the skew form (advective + divergence averages) together with
w = 0 enforced on both boundary faces; with spectral horizontal derivatives
this makes the discrete inner products <adv(c), c> vanish to rounding, which
is what the energy diagnostics rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid


# ----------------------------------------------------------------------
# containers


@dataclass
class State:
    """Prognostic fields at one instant.

    v has shape (2, nx, ny, nz) with component 0 along x, T has shape
    (nx, ny, nz), rho has shape (nx, ny).
    """

    v: np.ndarray
    T: np.ndarray
    rho: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.v.copy(), self.T.copy(), self.rho.copy(), self.t)


@dataclass
class DerivedFields:
    """Diagnostic fields reconstructed from a state.

    w: vertical velocity on the nz + 1 cell faces, shape (nx, ny, nz + 1).
    theta: hydrostatic pressure contribution of T, cell centers.
    p_s: surface pressure realized by the barotropic projection (zeros for a
    state examined outside a time step, where no projection has acted).
    """

    w: np.ndarray
    theta: np.ndarray
    p_s: np.ndarray


def zeros_state(grid: Grid, t: float = 0.0) -> State:
    return State(
        v=np.zeros((2, grid.nx, grid.ny, grid.nz)),
        T=np.zeros((grid.nx, grid.ny, grid.nz)),
        rho=np.zeros((grid.nx, grid.ny)),
        t=t,
    )


def validate_state(grid: Grid, state: State) -> None:
    """Raise ValueError if the field shapes do not match the grid."""
    expect = {
        "v": (2, grid.nx, grid.ny, grid.nz),
        "T": (grid.nx, grid.ny, grid.nz),
        "rho": (grid.nx, grid.ny),
    }
    for name, shape in expect.items():
        arr = getattr(state, name)
        if arr.shape != shape:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")


def random_state(grid: Grid, rng: np.random.Generator,
                 amplitude: float = 1.0, kmax: int = 2,
                 mmax: int = 2) -> State:
    """Smooth random state: low horizontal modes, Neumann-compatible vertical
    profiles, v projected, rho set to the reconstructed trace of T."""
    x = grid.x[:, None, None]
    y = grid.y[None, :, None]
    z = grid.z_centers[None, None, :]

    def smooth3d():
        f = np.zeros((grid.nx, grid.ny, grid.nz))
        for kx in range(-kmax, kmax + 1):
            for ky in range(0, kmax + 1):
                for m in range(0, mmax + 1):
                    a, b = rng.standard_normal(2)
                    phase = 2.0 * np.pi * (kx * x + ky * y)
                    f += (a * np.cos(phase) + b * np.sin(phase)) * np.cos(m * np.pi * z)
        norm = (2 * kmax + 1) * (kmax + 1) * (mmax + 1)
        return amplitude * f / np.sqrt(norm)

    v = np.stack([smooth3d(), smooth3d()])
    v = project_barotropic(grid, v)
    T = smooth3d()
    rho = trace_top(grid, T)
    return State(v=v, T=T, rho=rho, t=0.0)


# ----------------------------------------------------------------------
# vertical quadrature and reconstruction


def vertical_integral(grid: Grid, T: np.ndarray) -> np.ndarray:
    """theta(., z_k) = integral of T from 0 to z_k by the midpoint rule
    (full cells below z_k plus half of cell k); exact for constants."""
    csum = np.cumsum(T, axis=2)
    return grid.dz * (csum - 0.5 * T)


def vertical_average(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Vertical mean over the unit-depth column (midpoint rule)."""
    return f.mean(axis=-1)


def compute_w(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Diagnostic vertical velocity on faces: w(0) = 0 and
    w_{k+1} = w_k - dz * div_H v_k; w(1) vanishes when div_H vbar = 0."""
    div = grid.div_h(v[0], v[1])
    w = np.zeros((grid.nx, grid.ny, grid.nz + 1))
    w[..., 1:] = -grid.dz * np.cumsum(div, axis=2)
    return w


def trace_top(grid: Grid, T: np.ndarray) -> np.ndarray:
    """Second-order one-sided reconstruction of T at z = 1 from the two top
    cell centers (used for trace-consistency diagnostics)."""
    return 1.5 * T[..., -1] - 0.5 * T[..., -2]


def compute_derived(grid: Grid, state: State,
                    p_s: np.ndarray | None = None) -> DerivedFields:
    if p_s is None:
        p_s = np.zeros((grid.nx, grid.ny))
    return DerivedFields(
        w=compute_w(grid, state.v),
        theta=vertical_integral(grid, state.T),
        p_s=p_s,
    )


# ----------------------------------------------------------------------
# barotropic projection


def _projection_potential(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral potential q with Delta_H q = div_H vbar, (0,0) mode pinned."""
    vbar = vertical_average(grid, v)
    div_spec = (1j * grid.kx * grid.fft_h(vbar[0])
                + 1j * grid.ky * grid.fft_h(vbar[1]))
    k2 = grid.k2_deriv
    q_spec = np.zeros_like(div_spec)
    nonzero = k2 > 0.0
    q_spec[nonzero] = -div_spec[nonzero] / k2[nonzero]
    return q_spec


def project_with_potential(grid: Grid, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (v', q): v' = v - grad_H q with div_H vbar' = 0.

    The removed part grad_H q is independent of z and curl-free; q's (0,0)
    mode is 0, so the horizontal mean flow is untouched.
    """
    q_spec = _projection_potential(grid, v)
    gx = grid.ifft_h(1j * grid.kx * q_spec)
    gy = grid.ifft_h(1j * grid.ky * q_spec)
    out = v.copy()
    out[0] -= gx[:, :, None]
    out[1] -= gy[:, :, None]
    return out, grid.ifft_h(q_spec)


def project_barotropic(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Remove the z-independent gradient part so div_H vbar = 0."""
    out, _ = project_with_potential(grid, v)
    return out


# ----------------------------------------------------------------------
# diffusion operators with boundary closures


def laplacian_T(grid: Grid, T: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Full Laplacian of T: spectral horizontally, second differences
    vertically with the Neumann bottom ghost and the Dirichlet-to-rho top
    ghost (ghost = 2 rho - T_top)."""
    out = grid.laplacian_h(T)
    dz2 = grid.dz * grid.dz
    out[..., 0] += (T[..., 1] - T[..., 0]) / dz2
    if grid.nz > 2:
        out[..., 1:-1] += (T[..., :-2] - 2.0 * T[..., 1:-1] + T[..., 2:]) / dz2
    out[..., -1] += (T[..., -2] - 3.0 * T[..., -1] + 2.0 * rho) / dz2
    return out


def laplacian_v_component(grid: Grid, c: np.ndarray) -> np.ndarray:
    """Laplacian of one velocity component: Neumann ghosts on both walls."""
    out = grid.laplacian_h(c)
    dz2 = grid.dz * grid.dz
    out[..., 0] += (c[..., 1] - c[..., 0]) / dz2
    if grid.nz > 2:
        out[..., 1:-1] += (c[..., :-2] - 2.0 * c[..., 1:-1] + c[..., 2:]) / dz2
    out[..., -1] += (c[..., -2] - c[..., -1]) / dz2
    return out


def laplacian_v(grid: Grid, v: np.ndarray) -> np.ndarray:
    return np.stack([laplacian_v_component(grid, v[0]),
                     laplacian_v_component(grid, v[1])])


def surface_flux(grid: Grid, T: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """One-sided second-order estimate of dT/dz at z = 1 from rho and the two
    top cell centers: (8 rho - 9 T_{nz-1} + T_{nz-2}) / (3 dz)."""
    return (8.0 * rho - 9.0 * T[..., -1] + T[..., -2]) / (3.0 * grid.dz)


def half_cell_surface_flux(grid: Grid, T: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Half-cell difference 2 (rho - T_top) / dz: the energy-adjoint flux
    paired with the top ghost closure.  Used inside the implicit solve and the
    discrete energy identity; the coupled diffusion quadratic form with this
    pairing is exactly negative semidefinite."""
    return 2.0 * (rho - T[..., -1]) / grid.dz


def diffusion_T_rho(grid: Grid, T: np.ndarray,
                    rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Action of the coupled linear (diffusion + boundary-flux) operator:
    (Delta T with closures, Delta_H rho - half-cell flux)."""
    LT = laplacian_T(grid, T, rho)
    Lrho = grid.laplacian_h(rho) - half_cell_surface_flux(grid, T, rho)
    return LT, Lrho


# ----------------------------------------------------------------------
# advection (skew form; inner products vanish to rounding)


def _skew_vertical(grid: Grid, w: np.ndarray, c: np.ndarray) -> np.ndarray:
    """0.5 * (advective average + divergence form) of w dc/dz for a
    cell-centered scalar c, with w forced to zero on both boundary faces
    (the physical boundary condition, and what makes the form skew)."""
    dz = grid.dz
    wi = w[..., 1:-1]                       # interior faces 1 .. nz-1
    dcf = (c[..., 1:] - c[..., :-1]) / dz   # gradient on interior faces
    adv = np.zeros_like(c)
    adv[..., :-1] += wi * dcf
    adv[..., 1:] += wi * dcf
    flux = wi * 0.5 * (c[..., 1:] + c[..., :-1])
    divf = np.zeros_like(c)
    divf[..., :-1] += flux / dz
    divf[..., 1:] -= flux / dz
    return 0.5 * (0.5 * adv + divf)


def _skew_horizontal(grid: Grid, vx: np.ndarray, vy: np.ndarray,
                     c: np.ndarray) -> np.ndarray:
    """0.5 * (v . grad_H c + div_H(v c)) with spectral derivatives."""
    cx, cy = grid.grad_h(c)
    return 0.5 * (vx * cx + vy * cy + grid.div_h(vx * c, vy * c))


def _skew_scalar(grid: Grid, vx: np.ndarray, vy: np.ndarray, w: np.ndarray,
                 c: np.ndarray, dealias: bool) -> np.ndarray:
    if dealias:
        vx = grid.dealias(vx)
        vy = grid.dealias(vy)
        w = grid.dealias(w)
        c = grid.dealias(c)
    out = _skew_horizontal(grid, vx, vy, c) + _skew_vertical(grid, w, c)
    if dealias:
        out = grid.dealias(out)
    return out


def advection_v(grid: Grid, v: np.ndarray, w: np.ndarray,
                dealias: bool = True) -> np.ndarray:
    """Skew-form advection of each velocity component by (v, w)."""
    return np.stack([
        _skew_scalar(grid, v[0], v[1], w, v[0], dealias),
        _skew_scalar(grid, v[0], v[1], w, v[1], dealias),
    ])


def advection_T(grid: Grid, v: np.ndarray, w: np.ndarray, T: np.ndarray,
                rho: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Skew-form advection of T by (v, w).

    rho is accepted for interface completeness: the upper-face advective flux
    it would enter is w(1) * rho, which vanishes because w = 0 is enforced on
    the boundary faces.  Shapes are still validated.
    """
    if rho.shape != T.shape[:-1]:
        raise ValueError(f"rho shape {rho.shape} does not match T {T.shape}")
    return _skew_scalar(grid, v[0], v[1], w, T, dealias)


def advection_rho(grid: Grid, vbar: np.ndarray, rho: np.ndarray,
                  dealias: bool = True) -> np.ndarray:
    """Skew-form horizontal advection of the surface field by vbar."""
    vx, vy, r = vbar[0], vbar[1], rho
    if dealias:
        vx = grid.dealias(vx)
        vy = grid.dealias(vy)
        r = grid.dealias(r)
    out = _skew_horizontal(grid, vx, vy, r)
    if dealias:
        out = grid.dealias(out)
    return out
