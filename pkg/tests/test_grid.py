import math

import numpy as np
import pytest

from phasesep.core import CovarianceMatrix2, GaussianState, NumericalDomainError, PhysicalParams, minimum_uncertainty
from phasesep.dynamics import evolve
from phasesep.grid import (
    GaussianMixtureState,
    GridResolutionError,
    WignerGrid,
    cat_state,
    evolve_grid,
    fringe_amplitude,
    fringe_visibility,
    fringe_wavevector,
    moments,
    propagate_exact,
    rasterize,
    read_snapshot_binary,
    smear_grid,
    step_pde,
    write_snapshot_binary,
    write_snapshot_csv,
)

FREE_DIFFUSION = PhysicalParams(mass=math.inf)


def test_pure_diffusion_adds_variance_and_conserves_norm():
    g = rasterize(GaussianState.single(CovarianceMatrix2(1.0, 1.0)), WignerGrid.empty(768, 64, 15.0, 8.0))
    _, c0 = moments(g)
    z0 = g.integral()
    out = evolve_grid(g, 1.0, 1e-3, FREE_DIFFUSION)
    _, c1 = moments(out)
    assert out.integral() == pytest.approx(z0, abs=1e-6)
    assert c1.spp - c0.spp == pytest.approx(2 * 1.0 * 1000 * 1e-3, rel=1e-9)
    assert c1.sxx == pytest.approx(c0.sxx, rel=1e-12)


def test_moments_of_standard_gaussian():
    g = rasterize(GaussianState.single(CovarianceMatrix2(1.0, 1.0)), WignerGrid.empty(512, 512, 8.0, 8.0))
    mean, c = moments(g)
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(c.matrix, np.eye(2), atol=1e-4)


def test_moments_of_minimum_uncertainty_state():
    g = rasterize(minimum_uncertainty(), WignerGrid.empty(256, 256, 6.0, 6.0))
    _, c = moments(g)
    assert c.det == pytest.approx(0.25, rel=1e-6)


def test_moments_reject_unnormalized_grid():
    g = WignerGrid.empty(32, 32)
    with pytest.raises(NumericalDomainError):
        moments(g)


def test_propagate_exact_matches_closed_form():
    s = GaussianState.single(CovarianceMatrix2(0.7, 0.5, 0.2), (0.3, -0.4))
    mix = propagate_exact(GaussianMixtureState.from_gaussian(s), 0.8)
    ref = evolve(s, 0.8)
    (c,) = mix.components
    np.testing.assert_allclose(c.mean, ref.mean, atol=1e-15)
    np.testing.assert_allclose(c.cov, ref.cov, atol=1e-15)
    assert mix.integral() == pytest.approx(1.0, rel=1e-15)


def test_cat_state_normalized_and_fringed():
    cat = cat_state(4.0, 0.5)
    assert cat.integral() == pytest.approx(1.0, rel=1e-14)
    g = rasterize(cat, WignerGrid.empty(512, 512, 10.0, 10.0))
    assert g.integral() == pytest.approx(1.0, abs=1e-9)
    # interference makes the Wigner function negative near the origin
    assert g.values.min() < -0.05


def test_characteristic_function_decay_is_exact():
    cat = cat_state(4.0, 0.5)
    k = fringe_wavevector(4.0)
    a0 = cat.characteristic(k)
    for t in (0.01, 0.0625, 0.2):
        ratio = abs(propagate_exact(cat, t).characteristic(k)) / abs(a0)
        assert ratio == pytest.approx(math.exp(-16 * t), rel=1e-12)


def test_cat_visibility_decays_to_one_over_e():
    cat = cat_state(4.0, 0.5)
    k = fringe_wavevector(4.0)
    g0 = rasterize(cat, WignerGrid.empty())
    t_d = 1.0 / 16.0  # hbar^2 / (D d^2)
    seen = []
    evolve_grid(g0, 0.1, 1e-3, sample_times=np.arange(1, 11) * 0.01, callback=lambda g: seen.append((g.t, fringe_visibility(g, k, g0))))
    vis = np.array([v for _, v in seen])
    assert np.all(np.diff(vis) < 0)
    # log-linear interpolation is exact for a pure exponential
    v_td = math.exp(np.interp(t_d, [t for t, _ in seen], np.log(vis)))
    assert v_td == pytest.approx(math.exp(-1), rel=0.1)
    assert v_td == pytest.approx(math.exp(-1), rel=1e-3)


def test_step_pde_against_exact_propagation():
    s = GaussianState.single(CovarianceMatrix2(0.5, 0.5, 0.0), (0.5, 0.0))
    g0 = rasterize(s, WignerGrid.empty(512, 512, 8.0, 8.0))
    g1 = step_pde(g0, 1e-3)
    ref = rasterize(propagate_exact(GaussianMixtureState.from_gaussian(s), 1e-3), g0)
    err = np.abs(g1.values - ref.values).max() / np.abs(ref.values).max()
    assert err <= 1e-2
    assert g1.t == pytest.approx(1e-3)


def test_evolve_grid_matches_closed_form_moments():
    s = GaussianState.single(CovarianceMatrix2(0.6, 0.8, -0.2), (0.2, 0.3))
    g = evolve_grid(rasterize(s, WignerGrid.empty(256, 256, 9.0, 9.0)), 0.25, 2e-3)
    mean, c = moments(g)
    ref = evolve(s, 0.25)
    np.testing.assert_allclose(mean, ref.mean, atol=1e-6)
    np.testing.assert_allclose(c.matrix, ref.cov, atol=1e-5)


def test_evolve_grid_fused_equals_stepwise():
    s = GaussianState.single(CovarianceMatrix2(0.6, 0.8, -0.2))
    g0 = rasterize(s, WignerGrid.empty(128, 128, 8.0, 8.0))
    stepped = g0
    for _ in range(5):
        stepped = step_pde(stepped, 0.02)
    fused = evolve_grid(g0, 0.1, 0.02)
    # two half shears and one full shear differ only by interpolation error
    np.testing.assert_allclose(fused.values, stepped.values, atol=1e-5 * stepped.values.max())
    assert fused.t == pytest.approx(stepped.t)


def test_resolution_errors():
    g = rasterize(minimum_uncertainty(), WignerGrid.empty(512, 64))
    with pytest.raises(GridResolutionError):
        step_pde(g, 1e-5)  # kernel narrower than two cells
    with pytest.raises(GridResolutionError):
        fringe_amplitude(g, (200.0, 0.0))
    with pytest.raises(ValueError):
        evolve_grid(g, 0.0105, 1e-3)
    with pytest.raises(ValueError):
        step_pde(g, 0.0)


def test_boundary_warning(caplog):
    wide = GaussianState.single(CovarianceMatrix2(4.0, 4.0))
    g = rasterize(wide, WignerGrid.empty(128, 128, 3.0, 3.0))
    with caplog.at_level("WARNING"):
        evolve_grid(g, 0.1, 0.05)
    assert "boundary" in caplog.text


def test_smear_grid_adds_covariance():
    s = GaussianState.single(CovarianceMatrix2(0.5, 0.5))
    g = rasterize(s, WignerGrid.empty(256, 256, 8.0, 8.0))
    B = CovarianceMatrix2(0.5, 0.4, 0.1)
    _, c = moments(smear_grid(g, B))
    np.testing.assert_allclose(c.matrix, (s.mode_cov(0) + B).matrix, atol=1e-6)


def test_snapshot_binary_roundtrip(tmp_path):
    g = rasterize(cat_state(2.0, 0.5), WignerGrid.empty(64, 48, 5.0, 4.0))
    path = tmp_path / "w.bin"
    write_snapshot_binary(g, path)
    raw = path.read_bytes()
    assert len(raw) == 32 + 64 * 48 * 8 and raw[:4] == b"WGRD"
    back = read_snapshot_binary(path)
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_allclose(back.p, g.p, rtol=1e-15)
    np.testing.assert_allclose(back.x, g.x, rtol=1e-15)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_snapshot_binary(tmp_path / "bad.bin")


def test_snapshot_csv(tmp_path):
    g = rasterize(minimum_uncertainty(), WignerGrid.empty(4, 3, 1.0, 1.0))
    write_snapshot_csv(g, tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "p,x,W" and len(lines) == 1 + 12
    assert float(lines[1].split(",")[2]) == g.values[0, 0]
