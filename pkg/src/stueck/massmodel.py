"""Perturbed see-saw neutrino mass matrix and its inversion from oscillation data.

The matrix is

    [[P + 2d, Q,     Q    ],
     [Q,      P - d, Q    ],
     [Q,      Q,     P - d]]

with trace 3P. With r = d/Q fixed by the solar mixing angle, every
eigenvalue is linear in (P, Q): m_i = P + c_i(r) Q. The two measured
splittings then fix P/Q (from their ratio) and Q^2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_finite_scalar

# coefficients of Q as printed alongside the fitted perturbation (m_i = P + c_i Q)
PRINTED_COEFFICIENTS = (-1.052610, 2.001700, -0.949910)
PRINTED_DELTA_RATIO = -0.050909
SUM_MASS_BOUND_EV = 0.6
# published |m_i| (eV) for the standard and pRQM splittings at tan^2 = 0.452
PRINTED_TABLE1 = {
    "standard": {"dm2_21": 7.5e-5, "dm2_32": 2.32e-3, "masses_abs": (0.130955, 0.131141, 0.121975)},
    "prqm": {"dm2_21": 15.0e-5, "dm2_32": 4.64e-3, "masses_abs": (0.185056, 0.185461, 0.172499)},
}


class InfeasibleDataError(ValueError):
    """Oscillation data admit no real mass solution."""


@dataclass(frozen=True)
class MassMatrixParams:
    trace_p: float
    offdiag_q: float
    perturb_d: float

    def __post_init__(self):
        for name in ("trace_p", "offdiag_q", "perturb_d"):
            object.__setattr__(self, name, check_finite_scalar(getattr(self, name), name))


@dataclass(frozen=True)
class MassTriplet:
    m1: float
    m2: float
    m3: float

    @property
    def signed(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3])

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.signed)

    @property
    def ordering(self) -> str:
        a1, a2, a3 = self.abs
        if a3 < a1 < a2:
            return "inverted"
        if a1 < a2 < a3:
            return "normal"
        return "other"


@dataclass(frozen=True)
class OscillationData:
    dm2_21: float
    dm2_32: float
    tan2_theta12: float

    def __post_init__(self):
        for name in ("dm2_21", "dm2_32", "tan2_theta12"):
            value = check_finite_scalar(getattr(self, name), name)
            if value <= 0:
                raise InfeasibleDataError(f"{name} must be > 0 for a mass solution, got {value!r}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class MassSolution:
    params: MassMatrixParams
    triplet: MassTriplet
    delta_ratio: float
    coefficients: tuple[float, float, float]
    roundtrip_residuals: dict = field(default_factory=dict)
    alternate: "MassSolution | None" = None
    alternate_delta_ratio: float | None = None

    def to_dict(self) -> dict:
        out = {
            "params": asdict(self.params),
            "delta_ratio": self.delta_ratio,
            "coefficients": list(self.coefficients),
            "masses_signed": self.triplet.signed.tolist(),
            "masses_abs": self.triplet.abs.tolist(),
            "ordering": self.triplet.ordering,
            "roundtrip_residuals": dict(self.roundtrip_residuals),
            "alternate_delta_ratio": self.alternate_delta_ratio,
        }
        return out


def build_matrix(params: MassMatrixParams) -> np.ndarray:
    P, Q, d = params.trace_p, params.offdiag_q, params.perturb_d
    return np.array([[P + 2 * d, Q, Q],
                     [Q, P - d, Q],
                     [Q, Q, P - d]])


def eigenvalues_closed(params: MassMatrixParams) -> MassTriplet:
    P, Q, d = params.trace_p, params.offdiag_q, params.perturb_d
    root = math.sqrt(9 * d * d - 6 * Q * d + 9 * Q * Q)
    centre = P + Q / 2 + d / 2
    return MassTriplet(centre - root / 2, centre + root / 2, P - Q - d)


def eigenvalues_numeric(params: MassMatrixParams) -> np.ndarray:
    """Ascending eigenvalues from a symmetric eigensolver."""
    return np.linalg.eigvalsh(build_matrix(params))


def mixing_matrix(theta: float) -> np.ndarray:
    """Orthogonal matrix whose columns diagonalize the mass matrix at the fitted angle."""
    c, s = math.cos(theta), math.sin(theta)
    r2 = math.sqrt(2.0)
    return np.array([[c, -s, 0.0],
                     [s / r2, c / r2, -1.0 / r2],
                     [s / r2, c / r2, 1.0 / r2]])


def fitted_mixing_angle(params: MassMatrixParams) -> float:
    """Angle in (0, pi/2) at which the columns of ``mixing_matrix`` are eigenvectors.

    From the eigen-equations, tan(2 theta) = 2 sqrt(2) Q / (3 d - Q); squaring
    gives tan^2(2 theta) = 8 Q^2 / (Q - 3 d)^2, which cannot tell theta from
    pi/2 - theta.
    """
    Q, d = params.offdiag_q, params.perturb_d
    if Q == 0.0:
        raise ValueError("mixing angle is undefined for a diagonal matrix (Q = 0)")
    y, x = 2.0 * math.sqrt(2.0) * Q, 3.0 * d - Q
    if y < 0:
        y, x = -y, -x
    return 0.5 * math.atan2(y, x)


def tan2_double_angle(tan2_theta: float) -> float:
    """tan^2(2 theta) from tan^2(theta)."""
    if tan2_theta == 1.0:
        raise ValueError("tan^2(theta) = 1 puts theta at 45 degrees where tan(2 theta) is undefined")
    return 4.0 * tan2_theta / (1.0 - tan2_theta) ** 2


def delta_roots_from_double_angle(tan2_2theta: float) -> tuple[float, float]:
    """Both solutions r = d/Q of tan^2(2 theta) = 8 / (1 - 3 r)^2: (canonical, alternate)."""
    if not tan2_2theta > 0:
        raise ValueError(f"tan^2(2 theta) must be > 0, got {tan2_2theta!r}")
    root = math.sqrt(8.0 / tan2_2theta)
    return (1.0 - root) / 3.0, (1.0 + root) / 3.0


def delta_roots(tan2_theta12: float) -> tuple[float, float]:
    if not tan2_theta12 > 0:
        raise ValueError(f"tan2_theta12 must be > 0, got {tan2_theta12!r}")
    return delta_roots_from_double_angle(tan2_double_angle(tan2_theta12))


def delta_from_angle(tan2_theta12: float) -> float:
    """Perturbation ratio d/Q on the negative branch."""
    return delta_roots(tan2_theta12)[0]


def angle_from_delta(ratio: float) -> float:
    """Mixing angle theta in (0, pi/4] implied by r = d/Q."""
    t2 = 8.0 / (1.0 - 3.0 * ratio) ** 2
    return 0.5 * math.atan(math.sqrt(t2))


def mass_coefficients(ratio: float) -> tuple[float, float, float]:
    root = math.sqrt(9 * ratio * ratio - 6 * ratio + 9)
    return ((1 + ratio) / 2 - root / 2, (1 + ratio) / 2 + root / 2, -(1 + ratio))


def _splittings(P, Q, c):
    m = [P + ci * Q for ci in c]
    return m[1] ** 2 - m[0] ** 2, m[1] ** 2 - m[2] ** 2


def _solve_for_ratio(data: OscillationData, ratio: float) -> MassSolution:
    c1, c2, c3 = c = mass_coefficients(ratio)
    # m2^2 - m1^2 = (c2 - c1) Q (2P + (c1 + c2) Q); likewise with c3. Set x = P/Q.
    a21, b21 = c2 - c1, c1 + c2
    a32, b32 = c2 - c3, c2 + c3
    R = data.dm2_21 / data.dm2_32
    denom = 2.0 * (a21 - R * a32)
    if denom == 0.0:
        raise InfeasibleDataError("splitting ratio is degenerate with the mass coefficients")
    x = (R * a32 * b32 - a21 * b21) / denom
    q2 = data.dm2_21 / (a21 * (2.0 * x + b21))
    if not (np.isfinite(q2) and q2 > 0):
        raise InfeasibleDataError(
            f"no real solution: Q^2 = {q2!r} for dm2_21={data.dm2_21}, dm2_32={data.dm2_32}")
    Q = math.sqrt(q2)
    P = x * Q
    # overall sign: m2 positive
    if P + c2 * Q < 0:
        P, Q = -P, -Q
    P, Q = _polish(P, Q, c, data)
    params = MassMatrixParams(P, Q, ratio * Q)
    triplet = MassTriplet(*(P + ci * Q for ci in c))
    d21, d32 = _splittings(P, Q, c)
    t2 = math.tan(angle_from_delta(params.perturb_d / params.offdiag_q)) ** 2
    if data.tan2_theta12 > 1.0:
        t2 = 1.0 / t2
    residuals = {
        "dm2_21": (d21 - data.dm2_21) / data.dm2_21,
        "dm2_32": (d32 - data.dm2_32) / data.dm2_32,
        "tan2_theta12": (t2 - data.tan2_theta12) / data.tan2_theta12,
    }
    return MassSolution(params, triplet, ratio, c, residuals)


def _polish(P, Q, c, data, iterations=3):
    """Newton steps on the two splitting equations in (P, Q)."""
    target = np.array([data.dm2_21, data.dm2_32])
    for _ in range(iterations):
        f = np.array(_splittings(P, Q, c)) - target
        m = [P + ci * Q for ci in c]
        jac = np.array([[2 * (m[1] - m[0]), 2 * (m[1] * c[1] - m[0] * c[0])],
                        [2 * (m[1] - m[2]), 2 * (m[1] * c[1] - m[2] * c[2])]])
        try:
            dP, dQ = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        P, Q = P + dP, Q + dQ
    return P, Q


def solve_masses(data: OscillationData) -> MassSolution:
    """Masses on the canonical branch; ``alternate`` holds the other branch if feasible."""
    canonical, other = delta_roots(data.tan2_theta12)
    main = _solve_for_ratio(data, canonical)
    try:
        alt = _solve_for_ratio(data, other)
    except InfeasibleDataError:
        alt = None
    return MassSolution(main.params, main.triplet, main.delta_ratio, main.coefficients,
                        main.roundtrip_residuals, alt, other)


@dataclass(frozen=True)
class SumMassReport:
    total: float
    bound: float
    passed: bool


def sum_mass_check(triplet: MassTriplet, bound: float = SUM_MASS_BOUND_EV) -> SumMassReport:
    total = float(np.sum(triplet.abs))
    return SumMassReport(total, bound, total <= bound)


class SeeSawMassEstimator(BaseEstimator):
    """Estimator wrapper: rows of (dm2_21, dm2_32, tan2_theta12) -> |m_i|.

    ``dm2_scale`` multiplies both splittings before solving (2.0 maps
    standard-model splittings onto the pRQM reading).
    """

    def __init__(self, dm2_scale: float = 1.0):
        self.dm2_scale = dm2_scale

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns (dm2_21, dm2_32, tan2_theta12), got {X.shape[1]}")
        self.solutions_ = [self._solve_row(row) for row in X]
        self.n_features_in_ = 3
        return self

    def _solve_row(self, row):
        return solve_masses(OscillationData(row[0] * self.dm2_scale, row[1] * self.dm2_scale, row[2]))

    def predict(self, X):
        check_is_fitted(self, "solutions_")
        X = check_array(X, dtype=float)
        return np.array([self._solve_row(row).triplet.abs for row in X])

    def transform(self, X):
        """Signed masses (m1, m2, m3) per row."""
        check_is_fitted(self, "solutions_")
        X = check_array(X, dtype=float)
        return np.array([self._solve_row(row).triplet.signed for row in X])

    def fit_transform(self, X, y=None):
        self.fit(X)
        return np.array([s.triplet.signed for s in self.solutions_])
