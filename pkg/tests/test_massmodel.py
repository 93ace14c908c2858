import math

import numpy as np
import pytest
from sklearn.base import clone

from stueck.massmodel import (PRINTED_TABLE1, InfeasibleDataError, MassMatrixParams, MassTriplet,
                              OscillationData, SeeSawMassEstimator, angle_from_delta, build_matrix,
                              delta_from_angle, delta_roots, delta_roots_from_double_angle,
                              eigenvalues_closed, eigenvalues_numeric, fitted_mixing_angle,
                              mass_coefficients, mixing_matrix, solve_masses, sum_mass_check,
                              tan2_double_angle)

STANDARD = OscillationData(7.5e-5, 2.32e-3, 0.452)
PRQM = OscillationData(15.0e-5, 4.64e-3, 0.452)


# ---- matrix and eigenvalues


def test_build_matrix_examples():
    assert np.array_equal(build_matrix(MassMatrixParams(1, 0, 0)), np.eye(3))
    assert np.array_equal(build_matrix(MassMatrixParams(0, 1, 0)), np.ones((3, 3)) - np.eye(3))
    m = build_matrix(MassMatrixParams(0, 0, 1))
    assert np.array_equal(np.diag(m), [2, -1, -1])


def test_eigenvalue_examples():
    assert eigenvalues_closed(MassMatrixParams(1, 0, 0)).signed.tolist() == [1, 1, 1]
    assert eigenvalues_closed(MassMatrixParams(0, 1, 0)).signed.tolist() == [-1, 2, -1]


def test_closed_form_matches_eigensolver():
    rng = np.random.default_rng(0)
    for P, Q, d in rng.uniform(-1, 1, size=(10_000, 3)):
        p = MassMatrixParams(P, Q, d)
        closed = np.sort(eigenvalues_closed(p).signed)
        assert np.max(np.abs(closed - eigenvalues_numeric(p))) <= 1e-12 * max(1.0, abs(P) + abs(Q) + abs(d))


def test_trace_identity():
    p = MassMatrixParams(0.13, 0.004, -0.0002)
    assert np.sum(eigenvalues_closed(p).signed) == pytest.approx(3 * 0.13, rel=1e-14)


def test_params_reject_non_finite():
    with pytest.raises(ValueError):
        MassMatrixParams(float("nan"), 0, 0)


# ---- mixing matrix


@pytest.mark.parametrize("theta", [0.1, 0.5922, math.pi / 4, 1.3])
def test_mixing_matrix_is_rotation(theta):
    V = mixing_matrix(theta)
    assert np.allclose(V @ V.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(V) == pytest.approx(1.0, abs=1e-14)


def test_mixing_matrix_first_row_at_quarter_turn():
    r = math.sqrt(0.5)
    assert np.allclose(mixing_matrix(math.pi / 4)[0], [r, -r, 0.0])


@pytest.mark.parametrize("P, Q, d", [(0.13, 0.004, -0.0002), (0.5, 0.1, 0.0), (1.0, 0.2, 0.05),
                                     (0.2, -0.03, 0.001)])
def test_eigenvectors_at_fitted_angle(P, Q, d):
    params = MassMatrixParams(P, Q, d)
    M = build_matrix(params)
    V = mixing_matrix(fitted_mixing_angle(params))
    rayleigh = []
    for j in range(3):
        v = V[:, j]
        beta = v @ M @ v
        assert np.max(np.abs(M @ v - beta * v)) < 1e-10
        rayleigh.append(beta)
    assert np.allclose(np.sort(rayleigh), eigenvalues_numeric(params), atol=1e-12)


def test_fitted_angle_without_perturbation():
    theta = fitted_mixing_angle(MassMatrixParams(1.0, 0.3, 0.0))
    assert math.tan(2 * theta) ** 2 == pytest.approx(8.0, rel=1e-12)
    with pytest.raises(ValueError):
        fitted_mixing_angle(MassMatrixParams(1.0, 0.0, 0.1))


# ---- angle and delta ratio


def test_delta_from_angle_example():
    assert delta_from_angle(0.452) == pytest.approx(-0.0509089, abs=1e-7)


def test_delta_from_double_angle_examples():
    assert delta_roots_from_double_angle(8.0)[0] == pytest.approx(0.0, abs=1e-15)
    assert delta_roots_from_double_angle(2.0)[0] == pytest.approx(-1 / 3, rel=1e-14)
    t = 1.0 / 3.0  # tan^2(2 theta) = 4t/(1-t)^2 = 3
    assert tan2_double_angle(t) == pytest.approx(3.0)


def test_delta_rejects_maximal_mixing():
    with pytest.raises(ValueError):
        delta_from_angle(1.0)
    with pytest.raises(ValueError):
        delta_roots(0.0)


def test_angle_delta_round_trip():
    for t2 in (0.1, 0.3, 0.452, 0.8):
        r = delta_from_angle(t2)
        assert math.tan(angle_from_delta(r)) ** 2 == pytest.approx(t2, rel=1e-12)
    _, alt = delta_roots(0.452)
    assert alt == pytest.approx(0.7175756, abs=1e-7)
    assert math.tan(angle_from_delta(alt)) ** 2 == pytest.approx(0.452, rel=1e-12)


def test_mass_coefficients():
    c = mass_coefficients(delta_from_angle(0.452))
    assert np.allclose(c, (-1.052607, 2.001698, -0.949091), atol=1e-6)
    assert sum(c) == pytest.approx(0.0, abs=1e-14)


# ---- mass solution


@pytest.mark.parametrize("data, key", [(STANDARD, "standard"), (PRQM, "prqm")])
def test_reproduces_printed_masses(data, key):
    sol = solve_masses(data)
    printed = np.array(PRINTED_TABLE1[key]["masses_abs"])
    assert np.max(np.abs(sol.triplet.abs - printed) / printed) < 2.5e-3
    assert sol.triplet.ordering == "inverted"


def test_round_trip_residuals():
    sol = solve_masses(STANDARD)
    assert max(abs(v) for v in sol.roundtrip_residuals.values()) < 1e-9
    M = build_matrix(sol.params)
    assert np.allclose(np.sort(eigenvalues_numeric(sol.params)), np.sort(sol.triplet.signed), atol=1e-14)
    assert M.shape == (3, 3)


def test_splitting_scale_gives_root_two():
    a = solve_masses(STANDARD).triplet.abs
    b = solve_masses(PRQM).triplet.abs
    assert np.max(np.abs(b / a - math.sqrt(2))) < 1e-9


def test_alternate_branch_reported():
    sol = solve_masses(STANDARD)
    assert sol.alternate_delta_ratio == pytest.approx(0.7175756, abs=1e-7)
    assert sol.to_dict()["alternate_delta_ratio"] == sol.alternate_delta_ratio


@pytest.mark.parametrize("args", [(0.0, 2.32e-3, 0.452), (7.5e-5, 0.0, 0.452), (7.5e-5, 2.32e-3, 0.0),
                                  (-7.5e-5, 2.32e-3, 0.452)])
def test_infeasible_inputs(args):
    with pytest.raises(InfeasibleDataError):
        solve_masses(OscillationData(*args))


def test_sum_mass_check():
    assert sum_mass_check(solve_masses(STANDARD).triplet).passed
    rep = sum_mass_check(solve_masses(PRQM).triplet)
    assert rep.passed and rep.total == pytest.approx(0.54302, abs=5e-5)
    assert not sum_mass_check(MassTriplet(0.3, 0.3, 0.3)).passed
    assert sum_mass_check(MassTriplet(-0.2, 0.2, 0.2)).total == pytest.approx(0.6)


# ---- estimator


def test_estimator_predict_and_transform():
    X = np.array([[7.5e-5, 2.32e-3, 0.452]])
    est = SeeSawMassEstimator().fit(X)
    assert np.allclose(est.predict(X)[0], solve_masses(STANDARD).triplet.abs)
    assert np.allclose(est.fit_transform(X), est.transform(X))
    prqm = SeeSawMassEstimator(dm2_scale=2.0).fit(X)
    assert np.allclose(prqm.predict(X)[0], solve_masses(PRQM).triplet.abs, rtol=1e-12)


def test_estimator_sklearn_protocol():
    est = SeeSawMassEstimator(dm2_scale=2.0)
    assert est.get_params() == {"dm2_scale": 2.0}
    other = clone(est)
    assert other is not est and other.dm2_scale == 2.0
    with pytest.raises(ValueError):
        est.fit(np.ones((2, 4)))
    with pytest.raises(Exception):
        SeeSawMassEstimator().predict([[7.5e-5, 2.32e-3, 0.452]])
