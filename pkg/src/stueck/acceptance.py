"""Acceptance checks shared by ``stueck selftest`` and the test suite.

Each check returns a :class:`Check` with the measured quantity in
``detail``; none of them raise on failure.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import cosmology, massmodel, oscillation
from .bohmian import (DENSITY_FORM_RELATIVE_FLOOR, bohm_identity_error, chetaev_action,
                      continuity_residual, decompose, quantum_potential)
from .constants import NEUTRON_MASS, SOLAR_MASS, ModelConstants
from .evolution import EvolveConfig, Potential, evolve, free_gaussian_width, packet_width
from .fieldgrid import GridSpec, MetricSignature, gaussian_packet
from .trajectories import TrajectoryEnsemble, equivariance_test, integrate_trajectories


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        name, passed, detail = fn(*args, **kwargs)
        return Check(name, bool(passed), detail, time.perf_counter() - t0)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def table1_reproduction():
    worst_rel, worst_res = 0.0, 0.0
    t0 = time.perf_counter()
    for entry in massmodel.PRINTED_TABLE1.values():
        sol = massmodel.solve_masses(massmodel.OscillationData(entry["dm2_21"], entry["dm2_32"], 0.452))
        rel = np.abs(sol.triplet.abs - np.array(entry["masses_abs"])) / np.array(entry["masses_abs"])
        worst_rel = max(worst_rel, float(rel.max()))
        worst_res = max(worst_res, max(abs(v) for v in sol.roundtrip_residuals.values()))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 2.5e-3 and worst_res < 1e-9 and elapsed < 1.0
    return ("1 Table 1 masses", ok,
            f"max rel dev {worst_rel:.2e} (tol 2.5e-3), max round-trip {worst_res:.1e} (tol 1e-9), "
            f"solve time {elapsed:.3f} s (limit 1 s)")


@_timed
def delta_fit():
    r = massmodel.delta_from_angle(0.452)
    err = abs(r - massmodel.PRINTED_DELTA_RATIO)
    return "2 delta fit", err <= 5e-6, f"d/Q = {r:.9f}, |diff| {err:.1e} (tol 5e-6)"


@_timed
def cloud_sizes():
    d_prqm = cosmology.cloud_diameter(0.185461)
    d_std = cosmology.cloud_diameter(0.131141)
    v_prqm = cosmology.lss_compare(d_prqm, 90.0).verdict
    v_std = cosmology.lss_compare(d_std, 90.0).verdict
    ok = (88 <= d_prqm <= 91 and 148 <= d_std <= 151
          and v_prqm == "consistent" and v_std == "inconsistent")
    return ("3 cloud sizes", ok,
            f"pRQM {d_prqm:.2f} Mpc {v_prqm}, standard {d_std:.2f} Mpc {v_std}")


@_timed
def oscillation_limit(n_random: int = 100_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst_ratio, worst_double = 0.0, 0.0
    for _ in range(200):
        m1 = rng.uniform(1e-3, 1.0)
        m2 = m1 * (1.0 + rng.uniform(0.0, 1e-8))
        beta = 1.0 - rng.uniform(0.0, 1e-10)
        sc = oscillation.MixingScenario(m1, m2, rng.uniform(0.01, 1.5), rng.uniform(1, 1e4),
                                        rng.uniform(1e-3, 10), beta)
        dm2 = rng.uniform(1e-5, 1e-2)
        a_std = oscillation.alpha_standard(sc, dm2).alpha
        worst_ratio = max(worst_ratio, abs(oscillation.alpha_prqm(sc, dm2).alpha / a_std - 0.5))
        worst_double = max(worst_double, abs(oscillation.alpha_prqm(sc, 2 * dm2).alpha / a_std - 1.0))
    # survival over random scenarios, both models
    m1 = rng.uniform(0.0, 1.0, n_random)
    m2 = rng.uniform(0.0, 1.0, n_random) + 1e-9
    theta = rng.uniform(0.0, math.pi / 2, n_random)
    L = rng.uniform(0.1, 1e5, n_random)
    E = rng.uniform(1e-4, 100.0, n_random)
    beta = rng.uniform(1e-3, 1.0, n_random)
    lo, hi = np.inf, -np.inf
    for i in range(n_random):
        for model in ("standard", "prqm"):
            p = oscillation.survival_probability(
                oscillation.MixingScenario(m1[i], m2[i], theta[i], L[i], E[i], beta[i], model))
            lo, hi = min(lo, p), max(hi, p)
    ok = worst_ratio <= 1e-6 and worst_double <= 1e-6 and lo >= 0.0 and hi <= 1.0
    return ("4 oscillation limit", ok,
            f"|ratio - 1/2| {worst_ratio:.1e}, doubling {worst_double:.1e} (tol 1e-6); "
            f"survival range [{lo:.3g}, {hi:.3g}] over {n_random} scenarios")


def _norm_drift(grid, metric, U, n_steps, ds):
    psi0 = gaussian_packet(grid, metric, sigma=2.0)
    snaps = evolve(psi0, U, EvolveConfig(ds, n_steps, snapshot_stride=n_steps))
    return abs(snaps[-1].norm() - psi0.norm())


@_timed
def pde_suite():
    parts, ok = [], True
    # (a) unitarity over 1e4 split-steps
    t0 = time.perf_counter()
    g1 = GridSpec.uniform(-20.0, 20.0, 512)
    g2 = GridSpec.uniform(-20.0, 20.0, 512, ndim=2)
    drifts = [
        _norm_drift(g1, MetricSignature.euclidean(1), Potential.harmonic(0.5), 10_000, 1e-3),
        _norm_drift(g2, MetricSignature.euclidean(2), Potential.zero(), 10_000, 1e-3),
        _norm_drift(g2, MetricSignature((1, -1)), Potential.zero(), 10_000, 1e-3),
    ]
    elapsed = time.perf_counter() - t0
    ok &= max(drifts) < 1e-10 and elapsed < 60.0
    parts.append(f"(a) drift {max(drifts):.1e} in {elapsed:.1f} s")
    # (b) free Gaussian width at s = 2
    metric = MetricSignature.euclidean(1)
    psi0 = gaussian_packet(g1, metric, sigma=1.0)
    final = evolve(psi0, Potential.zero(), EvolveConfig(1e-3, 2000, snapshot_stride=2000))[-1]
    werr = abs(packet_width(final) - free_gaussian_width(2.0, 1.0))
    ok &= werr < 1e-4
    parts.append(f"(b) width err {werr:.1e}")
    # (c) continuity residual order under joint refinement of h and ds
    l2 = []
    for n, ds in ((128, 2e-3), (256, 1e-3)):
        g = GridSpec.uniform(-20.0, 20.0, n)
        start = gaussian_packet(g, metric, sigma=1.0, wavenumber=1.0)
        k = round(0.5 / ds)
        snaps = evolve(start, Potential.zero(), EvolveConfig(ds, k + 1))
        l2.append(continuity_residual(snaps[k - 1:k + 2]).l2)
    ratio = l2[0] / l2[1]
    ok &= ratio >= 3.5
    parts.append(f"(c) ratio {ratio:.2f}")
    # (d)-(f) unit Gaussian at s = 0
    g = GridSpec.uniform(-20.0, 20.0, 1024)
    field = gaussian_packet(g, metric, sigma=1.0)
    polar = decompose(field)
    q0 = quantum_potential(polar)[g.shape[0] // 2]
    qerr = abs(q0 - 0.25)
    # roundoff in the spectral second derivative grows like k_max^2 / P_floor,
    # so the node-wise identity is checked on a coarser (still resolved) grid
    coarse = gaussian_packet(GridSpec.uniform(-20.0, 20.0, 128), metric, sigma=1.0)
    floor = DENSITY_FORM_RELATIVE_FLOOR * float(np.max(np.abs(coarse.values)))
    ident = bohm_identity_error(decompose(coarse, floor))
    action = chetaev_action(field, polar).value
    ok &= qerr < 1e-6 and ident < 1e-8 and abs(action - 0.125) < 1e-6
    parts.append(f"(d) Q(0) err {qerr:.1e}, (e) identity {ident:.1e}, (f) action {action:.9f}")
    return "5 PDE suite", ok, "; ".join(parts)


@_timed
def equivariance(n_traj: int = 10_000, seed: int = 7):
    grid = GridSpec.uniform(-20.0, 20.0, 512)
    psi0 = gaussian_packet(grid, MetricSignature.euclidean(1), sigma=1.0)
    snaps = evolve(psi0, Potential.zero(), EvolveConfig(1e-3, 2000))
    ens = integrate_trajectories(snaps, TrajectoryEnsemble(n_traj, seed=seed, record_stride=500),
                                 ModelConstants())
    rep = equivariance_test(snaps, ens)
    ok = rep.final_ks < 0.025 and rep.final_ks < 2.0 * rep.initial_ks
    return ("6 equivariance", ok,
            f"KS s=0 {rep.initial_ks:.4f}, s=2 {rep.final_ks:.4f} (tol 0.025 and 2x initial)")


@_timed
def mass_matrix_algebra(n_draws: int = 10_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst_eig, worst_trace = 0.0, 0.0
    for _ in range(n_draws):
        p = massmodel.MassMatrixParams(*rng.uniform(-1.0, 1.0, 3))
        closed = np.sort(massmodel.eigenvalues_closed(p).signed)
        numeric = massmodel.eigenvalues_numeric(p)
        worst_eig = max(worst_eig, float(np.max(np.abs(closed - numeric))))
        worst_trace = max(worst_trace, abs(closed.sum() - np.trace(massmodel.build_matrix(p))))
    theta = massmodel.fitted_mixing_angle(massmodel.MassMatrixParams(0.3, 0.1, 0.0))
    t2 = math.tan(2.0 * theta) ** 2
    ok = worst_eig < 1e-10 and worst_trace < 1e-12 and abs(t2 - 8.0) < 1e-12
    return ("7 mass-matrix algebra", ok,
            f"eig {worst_eig:.1e} (tol 1e-10), trace {worst_trace:.1e} (tol 1e-12), "
            f"tan^2 2theta at d=0 = {t2:.15g}")


@_timed
def neutron_star():
    r_km = cosmology.degenerate_radius(NEUTRON_MASS, 1.4 * SOLAR_MASS) / 1e3
    return "8 neutron-star radius", 8.0 <= r_km <= 12.0, f"{r_km:.3f} km (band [8, 12])"


CHECKS = (table1_reproduction, delta_fit, cloud_sizes, oscillation_limit, pde_suite,
          equivariance, mass_matrix_algebra, neutron_star)


def run_all() -> list[Check]:
    return [check() for check in CHECKS]
