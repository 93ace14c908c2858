import math

import numpy as np
import pytest

from stueck.bohmian import (DENSITY_FORM_RELATIVE_FLOOR, bohm_identity_error, bohm_term_from_density,
                            chetaev_action, continuity_residual, decompose, hamilton_jacobi_residual,
                            quantum_potential, stability_functional, velocity_field)
from stueck.constants import ModelConstants
from stueck.evolution import EvolveConfig, Potential, evolve, ground_state
from stueck.fieldgrid import GridSpec, MetricSignature, WaveField, gaussian_packet, plane_wave

E1 = MetricSignature.euclidean(1)


def free_gaussian_snapshots(n, ds, n_steps, sigma=1.0, lo=-20.0, hi=20.0, wavenumber=0.0):
    grid = GridSpec.uniform(lo, hi, n)
    f0 = gaussian_packet(grid, E1, sigma, wavenumber=wavenumber)
    return evolve(f0, Potential.zero(), EvolveConfig(ds, n_steps))


def density_floor(field):
    return DENSITY_FORM_RELATIVE_FLOOR * float(np.max(np.abs(field.values)))


# ---- decompose


def test_decompose_plane_wave():
    grid = GridSpec.uniform(0, 2 * np.pi, 64)
    p = decompose(WaveField(grid, E1, np.exp(1j * grid.coords()[0])))
    q = grid.coords()[0]
    assert np.allclose(p.A, 1.0)
    assert np.allclose(np.exp(1j * p.S), np.exp(1j * q), atol=1e-12)


def test_decompose_real_gaussian_and_constant_phase():
    grid = GridSpec.uniform(-5, 5, 64)
    g = gaussian_packet(grid, E1, 1.0)
    p = decompose(g)
    assert np.allclose(p.S, 0.0) and np.allclose(p.A, g.values.real)
    c = decompose(WaveField(grid, E1, np.full(64, 0.5 * np.exp(0.3j))), constants=ModelConstants(hbar=2.0))
    assert np.allclose(c.A, 0.5) and np.allclose(c.S, 0.6)


def test_decompose_rejects_zero_field():
    grid = GridSpec.uniform(-1, 1, 16)
    with pytest.raises(ValueError):
        decompose(WaveField(grid, E1, np.zeros(16, dtype=complex)))


def test_reconstruction():
    snaps = free_gaussian_snapshots(256, 1e-2, 50, wavenumber=1.3)
    f = snaps[-1]
    p = decompose(f, constants=ModelConstants(hbar=1.0))
    off = ~p.mask
    assert np.max(np.abs(p.reconstruct()[off] - f.values[off])) < 1e-10
    assert np.all(p.A >= 0)


# ---- quantum potential


def test_quantum_potential_gaussian():
    grid = GridSpec.uniform(-20, 20, 1024)
    p = decompose(gaussian_packet(grid, E1, 1.0))
    Q = quantum_potential(p)
    q = grid.coords()[0]
    assert Q[512] == pytest.approx(0.25, abs=1e-6)
    centre = np.abs(q) < 6
    assert np.max(np.abs(Q[centre] - (0.25 - q[centre] ** 2 / 8))) < 1e-8


def test_quantum_potential_vanishes_for_constant_amplitude():
    grid = GridSpec.uniform(0, 2 * np.pi, 64)
    assert np.max(np.abs(quantum_potential(decompose(plane_wave(grid, E1, 3.0))))) < 1e-12
    const = WaveField(grid, E1, np.full(64, 2.0 + 0j))
    assert np.max(np.abs(quantum_potential(decompose(const)))) < 1e-12


def test_quantum_potential_masks_instead_of_dividing_by_zero():
    grid = GridSpec.uniform(-1, 1, 32)
    vals = np.ones(32, dtype=complex)
    vals[10] = 0.0
    Q = quantum_potential(decompose(WaveField(grid, E1, vals)))
    assert np.isnan(Q[10]) and np.isfinite(np.delete(Q, 10)).all()


def test_quantum_potential_matches_density_form():
    grid = GridSpec.uniform(-20, 20, 128)
    f = gaussian_packet(grid, E1, 1.0, wavenumber=0.8)
    p = decompose(f, density_floor(f))
    Q = quantum_potential(p)
    B = bohm_term_from_density(p.density, grid, E1, p.mask)
    off = ~p.mask
    assert np.max(np.abs(Q[off] - B[off])) < 1e-8


def test_bohm_identity_on_gaussian():
    grid = GridSpec.uniform(-20, 20, 128)
    f = gaussian_packet(grid, E1, 1.0)
    assert bohm_identity_error(decompose(f, density_floor(f))) < 1e-8


def test_bohm_identity_roundoff_grows_with_resolution():
    # the bracket divides a spectral second derivative (error ~ eps k_max^2) by P
    errs = []
    for n in (128, 512):
        f = gaussian_packet(GridSpec.uniform(-20, 20, n), E1, 1.0)
        errs.append(bohm_identity_error(decompose(f, density_floor(f))))
    assert errs[1] > errs[0]


# ---- stability functional and velocity


def test_lambda_zero_for_linear_phase():
    grid = GridSpec.uniform(0, 2 * np.pi, 64, ndim=2)
    f = plane_wave(grid, MetricSignature((1, -1)), (2, 3))
    st = stability_functional(decompose(f))
    assert st.max_abs_lambda < 1e-10


def test_lambda_one_for_quadratic_phase():
    grid = GridSpec.uniform(-30, 30, 1024)
    q = grid.coords()[0]
    f = WaveField(grid, E1, np.exp(-q**2 / 16 + 0.5j * q**2))
    lam = stability_functional(decompose(f)).Lambda
    centre = np.abs(q) < 5
    assert np.max(np.abs(lam[centre] - 1.0)) < 1e-5


def test_epsilon_is_lambda_over_2k():
    grid = GridSpec.uniform(-30, 30, 512)
    q = grid.coords()[0]
    c = ModelConstants(hbar=2.0, mass=1.0)
    f = WaveField(grid, E1, np.exp(-q**2 / 16 + 0.25j * q**2))
    st = stability_functional(decompose(f, constants=c), c)
    off = np.isfinite(st.Lambda)
    assert np.allclose(st.epsilon[off], st.Lambda[off] / (2 * c.k))


def test_free_gaussian_velocity_and_lambda():
    snaps = free_gaussian_snapshots(512, 1e-3, 2000)
    f = snaps[-1]
    q = f.grid.coords()[0]
    s = f.s
    centre = np.abs(q) < 8
    v = velocity_field(f)[0]
    assert np.max(np.abs(v[centre] - q[centre] * s / (4 + s**2))) < 1e-6
    lam = stability_functional(decompose(f)).Lambda
    assert np.max(np.abs(lam[centre] - s / (4 + s**2))) < 1e-6


def test_velocity_examples():
    grid = GridSpec.uniform(0, 2 * np.pi, 64)
    assert np.allclose(velocity_field(plane_wave(grid, E1, 1.0)), 1.0)
    g = gaussian_packet(GridSpec.uniform(-10, 10, 128), E1, 1.0)
    v = velocity_field(g, amplitude_floor=density_floor(g))
    assert np.nanmax(np.abs(v)) < 1e-12


def test_velocity_sign_follows_metric():
    grid = GridSpec.uniform(0, 2 * np.pi, 32, ndim=2)
    v = velocity_field(plane_wave(grid, MetricSignature((1, -1)), (1, 1)))
    assert np.allclose(v[0], 1.0) and np.allclose(v[1], -1.0)


# ---- residuals


def test_plane_wave_residuals():
    grid = GridSpec.uniform(0, 2 * np.pi, 64)
    snaps = evolve(plane_wave(grid, E1, 2.0), Potential.zero(), EvolveConfig(1e-3, 4))
    assert continuity_residual(snaps).l2 < 1e-10
    assert hamilton_jacobi_residual(snaps).l2 < 1e-8


def test_continuity_order_under_joint_refinement():
    l2 = []
    for n, ds in ((128, 2e-3), (256, 1e-3)):
        k = round(0.5 / ds)
        snaps = free_gaussian_snapshots(n, ds, k + 1, wavenumber=1.0)
        l2.append(continuity_residual(snaps[k - 1:k + 2]).l2)
    assert l2[0] / l2[1] >= 3.5


def test_continuity_residual_of_harmonic_eigenstate():
    grid = GridSpec.uniform(-10, 10, 128)
    U = Potential.harmonic(1.0)
    gs = ground_state(grid, E1, U)
    snaps = evolve(gs, U, EvolveConfig(1e-3, 2))
    assert continuity_residual(snaps).l2 < 1e-8


def test_hamilton_jacobi_order():
    l2 = []
    for ds in (4e-3, 2e-3, 1e-3):
        k = round(0.5 / ds)
        snaps = free_gaussian_snapshots(256, ds, k + 1)
        rep = hamilton_jacobi_residual(snaps[k - 1:k + 2])
        l2.append(rep.l2)
        assert rep.identity_max_error < 1e-8
    orders = [math.log2(l2[i] / l2[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_hamilton_jacobi_with_potential():
    grid = GridSpec.uniform(-10, 10, 128)
    U = Potential.harmonic(1.0)
    gs = ground_state(grid, E1, U)
    # stationary state: d_s S = -E, grad S = 0, U + Q = E; the relaxed state
    # carries the O(dtau^2) splitting error of the imaginary-time steps
    snaps = evolve(gs, U, EvolveConfig(1e-3, 2))
    assert hamilton_jacobi_residual(snaps, U).l2 < 1e-5


def test_residuals_reject_bad_input():
    snaps = free_gaussian_snapshots(64, 1e-2, 2)
    with pytest.raises(ValueError):
        continuity_residual(snaps[:2])
    other = gaussian_packet(GridSpec.uniform(-20, 20, 32), E1, 1.0)
    with pytest.raises(ValueError):
        continuity_residual([snaps[0], snaps[1], other])
    uneven = [snaps[0], snaps[1], snaps[2].with_values(snaps[2].values, s=0.5)]
    with pytest.raises(ValueError):
        continuity_residual(uneven)


# ---- Chetaev action


@pytest.mark.parametrize("sigma, expected", [(1.0, 0.125), (2.0, 0.03125)])
def test_chetaev_action_gaussian(sigma, expected):
    grid = GridSpec.uniform(-30, 30, 1024)
    f = gaussian_packet(grid, E1, sigma)
    act = chetaev_action(f)
    assert act.value == pytest.approx(expected, abs=1e-6)
    assert act.integration_by_parts == pytest.approx(expected, abs=1e-6)
    assert not act.low_confidence


def test_chetaev_action_plane_wave_and_monotonicity():
    grid = GridSpec.uniform(0, 2 * np.pi, 64)
    assert abs(chetaev_action(plane_wave(grid, E1, 1.0)).value) < 1e-12
    big = GridSpec.uniform(-40, 40, 2048)
    values = [chetaev_action(gaussian_packet(big, E1, s)).value for s in (0.5, 1.0, 2.0, 4.0)]
    assert all(v >= 0 for v in values)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_chetaev_action_flags_masked_mass():
    grid = GridSpec.uniform(-10, 10, 64)
    f = gaussian_packet(grid, E1, 1.0)
    p = decompose(f, 0.5 * float(np.max(np.abs(f.values))))
    assert chetaev_action(f, p).low_confidence
