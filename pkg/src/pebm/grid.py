"""Discretization of the periodic unit box (0,1)^2 x (0,1).

Horizontal directions are periodic and handled by Fourier collocation on even
numbers of points (real FFTs over the first two array axes).  The vertical
direction uses second-order finite differences on cell centers
z_k = (k + 1/2) dz; the diagnostic vertical velocity lives on the nz + 1 cell
faces z = k dz.  Wavenumbers, Nyquist handling and the 2/3-rule dealiasing
mask are precomputed here so the operator modules stay allocation-light.

Scalar fields are arrays of shape (nx, ny) or (nx, ny, nz); the horizontal
velocity is (2, nx, ny, nz) with component 0 along x.
"""

from __future__ import annotations

import numpy as np


class Grid:
    """Uniform grid on the unit box plus horizontal spectral machinery.

    Use :func:`make_grid` instead of constructing directly; it validates the
    resolution constraints.
    """

    def __init__(self, nx: int, ny: int, nz: int, dt: float):
        self.nx = nx
        self.ny = ny
        self.nz = nz
        self.dt = dt
        self.dx = 1.0 / nx
        self.dy = 1.0 / ny
        self.dz = 1.0 / nz
        # cell centers and faces of the vertical direction
        self.z_centers = (np.arange(nz) + 0.5) * self.dz
        self.z_faces = np.arange(nz + 1) * self.dz
        # collocation points (used by tests and manufactured solutions)
        self.x = np.arange(nx) * self.dx
        self.y = np.arange(ny) * self.dy

        # integer wavenumbers; the y axis is the halved (real-FFT) axis
        kxi = np.fft.fftfreq(nx, d=1.0 / nx).astype(int)
        kyi = np.arange(ny // 2 + 1)
        self._kxi = kxi
        self._kyi = kyi
        two_pi = 2.0 * np.pi
        kx = two_pi * kxi.astype(float)
        ky = two_pi * kyi.astype(float)
        # derivatives zero the unpaired Nyquist mode of the differentiated
        # direction so that d/dx stays skew-adjoint on real fields
        kx_d = kx.copy()
        kx_d[np.abs(kxi) == nx // 2] = 0.0
        ky_d = ky.copy()
        ky_d[kyi == ny // 2] = 0.0
        self.kx = kx_d[:, None] * np.ones_like(ky)[None, :]
        self.ky = np.ones_like(kx)[:, None] * ky_d[None, :]
        # |k|^2 with the full Nyquist contribution, used by the diffusion
        # operators (damping the Nyquist mode is safe; differentiating it
        # is not)
        self.k2 = (kx**2)[:, None] + (ky**2)[None, :]
        # |k|^2 built from the derivative wavenumbers, used when inverting
        # the horizontal Laplacian so that gradient and inverse agree
        self.k2_deriv = self.kx**2 + self.ky**2

        # 2/3-rule mask: keep |k| <= n//3 in each direction
        keep_x = np.abs(kxi) <= nx // 3
        keep_y = kyi <= ny // 3
        self.dealias_mask = keep_x[:, None] & keep_y[None, :]

    # ------------------------------------------------------------------
    # transforms

    def fft_h(self, f: np.ndarray) -> np.ndarray:
        """Horizontal Fourier transform over the first two axes.

        Normalized so a constant field f = c has coefficient c in the
        (0, 0) mode.  Returns shape (nx, ny//2 + 1, ...).
        """
        return np.fft.rfft2(f, axes=(0, 1), norm="forward")

    def ifft_h(self, spec: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`fft_h`; returns a real field."""
        return np.fft.irfft2(spec, s=(self.nx, self.ny), axes=(0, 1),
                             norm="forward")

    def _hshape(self, arr: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Broadcast a (nx, ny//2+1) spectral factor against f's trailing axes."""
        if f.ndim == 2:
            return arr
        return arr.reshape(arr.shape + (1,) * (f.ndim - 2))

    # ------------------------------------------------------------------
    # spectral derivatives (exact for resolved modes, Nyquist zeroed)

    def ddx(self, f: np.ndarray) -> np.ndarray:
        spec = self.fft_h(f)
        spec *= 1j * self._hshape(self.kx, f)
        return self.ifft_h(spec)

    def ddy(self, f: np.ndarray) -> np.ndarray:
        spec = self.fft_h(f)
        spec *= 1j * self._hshape(self.ky, f)
        return self.ifft_h(spec)

    def grad_h(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        spec = self.fft_h(f)
        gx = self.ifft_h(1j * self._hshape(self.kx, f) * spec)
        gy = self.ifft_h(1j * self._hshape(self.ky, f) * spec)
        return gx, gy

    def div_h(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        spec = (1j * self._hshape(self.kx, fx) * self.fft_h(fx)
                + 1j * self._hshape(self.ky, fy) * self.fft_h(fy))
        return self.ifft_h(spec)

    def laplacian_h(self, f: np.ndarray) -> np.ndarray:
        spec = self.fft_h(f)
        spec *= -self._hshape(self.k2, f)
        return self.ifft_h(spec)

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """Project a physical-space field onto the 2/3-rule resolved modes."""
        spec = self.fft_h(f)
        spec *= self._hshape(self.dealias_mask, f)
        return self.ifft_h(spec)

    def __repr__(self) -> str:  # pragma: no cover
        return (f"Grid(nx={self.nx}, ny={self.ny}, nz={self.nz}, "
                f"dt={self.dt})")


def make_grid(nx: int, ny: int, nz: int, dt: float) -> Grid:
    """Build a grid, enforcing the resolution and step preconditions."""
    errors = []
    if nx < 4 or nx % 2 != 0:
        errors.append(f"nx must be even and >= 4, got {nx}")
    if ny < 4 or ny % 2 != 0:
        errors.append(f"ny must be even and >= 4, got {ny}")
    if nz < 3:
        errors.append(f"nz must be >= 3, got {nz}")
    if not (dt > 0.0):
        errors.append(f"dt must be positive, got {dt}")
    if errors:
        raise ValueError("; ".join(errors))
    g = Grid(nx, ny, nz, dt)
    # spacings must tile the unit box exactly in floating point
    for n, d, name in ((nx, g.dx, "dx"), (ny, g.dy, "dy"), (nz, g.dz, "dz")):
        if d * n != 1.0:
            raise ValueError(f"{name} * n does not reproduce 1.0 exactly")
    return g
