"""Figure rendering: deterministic bytes, validation before file creation,
real PNG output.
"""

import numpy as np
import pytest

import pebm.diagnostics as diag
import pebm.report as report
from pebm.grid import make_grid

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def sample_energy_trace():
    tr = diag.EnergyTrace()
    for k in range(6):
        row = {c: 0.0 for c in diag.ENERGY_COLUMNS}
        row.update(t=k * 0.1, v_sq=1.0 / (k + 1), T_sq=0.5,
                   rho_sq=0.1 * k, diss_inc=0.01, work_inc=0.02,
                   sink_inc=0.001)
        tr.append(**row)
    return tr


def sample_difference_trace():
    tr = diag.DifferenceTrace()
    for k in range(5):
        tr.append(t=k * 0.1, sigma_v_sq=1e-8 * np.exp(-k),
                  sigma_T_sq=2e-8 * np.exp(-k), sigma_rho_sq=0.0,
                  sigma_grad_sq=1e-7 * np.exp(-k), g_weight=3.0)
    return tr


def assert_png(path):
    data = path.read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 1000


def render_twice(fn, tmp_path, *args):
    p1 = tmp_path / "a.png"
    p2 = tmp_path / "b.png"
    fn(*args, p1)
    fn(*args, p2)
    assert_png(p1)
    assert p1.read_bytes() == p2.read_bytes()


def test_plot_energy_deterministic(tmp_path):
    render_twice(report.plot_energy, tmp_path, sample_energy_trace())


def test_plot_orbit_convergence_deterministic(tmp_path):
    render_twice(report.plot_orbit_convergence, tmp_path,
                 [1e-2, 3e-4, 1e-6, 2e-9])


def test_plot_surface_deterministic(tmp_path):
    g = make_grid(8, 8, 4, 1e-3)
    rho = np.sin(2 * np.pi * g.x)[:, None] * np.cos(2 * np.pi * g.y)[None, :]
    render_twice(report.plot_surface, tmp_path, g, rho)


def test_plot_difference_deterministic(tmp_path):
    render_twice(report.plot_difference, tmp_path, sample_difference_trace())


def test_empty_inputs_rejected_without_files(tmp_path):
    target = tmp_path / "never.png"
    with pytest.raises(ValueError, match="empty"):
        report.plot_energy(diag.EnergyTrace(), target)
    with pytest.raises(ValueError, match="empty"):
        report.plot_orbit_convergence([], target)
    with pytest.raises(ValueError, match="empty"):
        report.plot_difference(diag.DifferenceTrace(), target)
    assert not target.exists()


def test_bad_residuals_rejected(tmp_path):
    target = tmp_path / "never.png"
    with pytest.raises(ValueError, match="finite"):
        report.plot_orbit_convergence([1e-3, np.nan], target)
    with pytest.raises(ValueError, match="nonnegative"):
        report.plot_orbit_convergence([1e-3, -1e-5], target)
    assert not target.exists()


def test_bad_surface_rejected(tmp_path):
    g = make_grid(8, 8, 4, 1e-3)
    target = tmp_path / "never.png"
    with pytest.raises(ValueError, match="shape"):
        report.plot_surface(g, np.zeros((4, 4)), target)
    bad = np.zeros((8, 8))
    bad[3, 3] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        report.plot_surface(g, bad, target)
    assert not target.exists()


def test_plot_surface_title(tmp_path):
    g = make_grid(8, 8, 4, 1e-3)
    p1 = tmp_path / "t1.png"
    p2 = tmp_path / "t2.png"
    report.plot_surface(g, np.zeros((8, 8)), p1, title="alpha")
    report.plot_surface(g, np.zeros((8, 8)), p2, title="omega")
    assert p1.read_bytes() != p2.read_bytes()   # the title is really drawn
