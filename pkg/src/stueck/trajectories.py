"""Guided trajectory ensembles and the equivariance (|psi|^2-distribution) test."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import stats

from ._validation import check_matching_grids, check_uniform_spacing
from .bohmian import velocity_field
from .constants import ModelConstants
from .fieldgrid import GridSpec, WaveField

INTEGRATORS = ("rk4", "euler")


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Trajectory set; ``positions`` has shape (n_records, n_traj, D) once integrated.

    ``initial`` (n_traj, D) overrides sampling from |psi|^2 when given.
    Positions are recorded every ``record_stride`` snapshots plus the last.
    """

    n_traj: int
    seed: int = 0
    integrator: str = "rk4"
    initial: np.ndarray | None = None
    record_stride: int = 1
    positions: np.ndarray | None = None
    s: np.ndarray | None = None
    resampled: int = 0
    dead: int = 0

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError(f"n_traj must be a positive integer, got {self.n_traj!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.initial is not None:
            init = np.asarray(self.initial, dtype=float)
            if init.ndim == 1:
                init = init[:, None]
            if init.shape[0] != self.n_traj:
                raise ValueError(f"initial has {init.shape[0]} rows, n_traj is {self.n_traj}")
            object.__setattr__(self, "initial", init)

    @property
    def final(self) -> np.ndarray:
        if self.positions is None:
            raise ValueError("ensemble has not been integrated")
        return self.positions[-1]


@dataclass(frozen=True, eq=False)
class EquivarianceReport:
    s: np.ndarray
    ks: np.ndarray
    n_traj: int

    @property
    def max_ks(self) -> float:
        return float(np.max(self.ks))

    @property
    def initial_ks(self) -> float:
        return float(self.ks[0])

    @property
    def final_ks(self) -> float:
        return float(self.ks[-1])


def _uniforms(seed: int, ids, ndim: int, draw: int = 0) -> np.ndarray:
    # one stream per trajectory: results do not depend on batching or threads
    return np.array([np.random.default_rng([seed, int(i), draw]).random(ndim) for i in ids])


def _periodic_nodes(axis):
    return axis.lo + axis.spacing * np.arange(axis.n + 1)


def _cdf_table(p_line: np.ndarray, axis) -> np.ndarray:
    """Normalized trapezoid CDF at the n+1 periodic nodes (last node = hi)."""
    closed = np.concatenate([p_line, p_line[..., :1]], axis=-1)
    cells = 0.5 * (closed[..., 1:] + closed[..., :-1]) * axis.spacing
    cdf = np.concatenate([np.zeros(cells.shape[:-1] + (1,)), np.cumsum(cells, axis=-1)], axis=-1)
    return cdf / cdf[..., -1:]


def marginal_cdf(field: WaveField, axis: int = 0):
    """Callable CDF of the |psi|^2 marginal along ``axis``, piecewise linear between nodes."""
    grid = field.grid
    P = field.density()
    other = tuple(a for a in range(grid.ndim) if a != axis)
    line = P.sum(axis=other) if other else P
    ax = grid.axes[axis]
    nodes = _periodic_nodes(ax)
    table = _cdf_table(line, ax)

    def cdf(x):
        x = ax.lo + np.mod(np.asarray(x, dtype=float) - ax.lo, ax.length)
        return np.interp(x, nodes, table)

    return cdf


def _inverse_rows(u: np.ndarray, rows: np.ndarray, ax) -> np.ndarray:
    """Invert per-sample CDF tables ``rows`` (N, n+1) at ``u`` (N,)."""
    nodes = _periodic_nodes(ax)
    j = np.sum(rows <= u[:, None], axis=1) - 1
    j = np.clip(j, 0, ax.n - 1)
    lo = rows[np.arange(len(u)), j]
    hi = rows[np.arange(len(u)), j + 1]
    width = np.where(hi > lo, hi - lo, 1.0)
    frac = np.where(hi > lo, (u - lo) / width, 0.5)
    return nodes[j] + frac * ax.spacing


def sample_positions(field: WaveField, ids, seed: int = 0, draw: int = 0) -> np.ndarray:
    """Draw positions from |psi|^2 by inverse CDF, one RNG stream per trajectory id.

    1D: the piecewise-linear trapezoid CDF. 2D: marginal along q0, then the
    conditional along q1 from rows interpolated linearly in q0. Higher D:
    cell masses, then uniform within the cell.
    """
    grid = field.grid
    ids = np.atleast_1d(np.asarray(ids))
    u = _uniforms(seed, ids, grid.ndim, draw)
    P = field.density()
    if grid.ndim == 1:
        ax = grid.axes[0]
        return np.interp(u[:, 0], _cdf_table(P, ax), _periodic_nodes(ax))[:, None]
    if grid.ndim == 2:
        ax0, ax1 = grid.axes
        q0 = np.interp(u[:, 0], _cdf_table(P.sum(axis=1), ax0), _periodic_nodes(ax0))
        f = (q0 - ax0.lo) / ax0.spacing
        i = np.floor(f).astype(int) % ax0.n
        w = (f - np.floor(f))[:, None]
        rows = (1.0 - w) * P[i] + w * P[(i + 1) % ax0.n]
        q1 = _inverse_rows(u[:, 1], _cdf_table(rows, ax1), ax1)
        return grid.wrap(np.stack([q0, q1], axis=1))
    flat = P.ravel() / P.sum()
    cells = np.searchsorted(np.cumsum(flat), u[:, 0] * (1.0 - 1e-15), side="right")
    idx = np.stack(np.unravel_index(cells, grid.shape), axis=1)
    jitter = _uniforms(seed, ids, grid.ndim, draw + 1_000_000)
    q = np.stack([grid.axes[a].lo + (idx[:, a] + jitter[:, a] - 0.5) * grid.axes[a].spacing
                  for a in range(grid.ndim)], axis=1)
    return grid.wrap(q)


def interpolate_periodic(values: np.ndarray, grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Multilinear periodic interpolation of a (C, *shape) stack at points q (N, D) -> (N, C).

    Rows of ``q`` that are not finite give NaN.
    """
    D = grid.ndim
    finite = np.all(np.isfinite(q), axis=1)
    q = np.where(finite[:, None], q, 0.0)
    base, frac = [], []
    for a, ax in enumerate(grid.axes):
        f = (q[:, a] - ax.lo) / ax.spacing
        fl = np.floor(f)
        base.append(fl.astype(int) % ax.n)
        frac.append(f - fl)
    out = np.zeros((q.shape[0], values.shape[0]))
    for corner in range(2**D):
        w = np.ones(q.shape[0])
        idx = []
        for a in range(D):
            bit = (corner >> a) & 1
            w = w * (frac[a] if bit else 1.0 - frac[a])
            idx.append((base[a] + bit) % grid.axes[a].n)
        out += w[:, None] * values[(slice(None), *idx)].T
    out[~finite] = np.nan
    return out


def integrate_trajectories(snapshots: Sequence[WaveField], ensemble: TrajectoryEnsemble,
                           constants: ModelConstants | None = None,
                           amplitude_floor: float | None = None) -> TrajectoryEnsemble:
    """Advance every trajectory through the snapshots under v^a = (1/m) d^a S.

    The step is the snapshot spacing; RK4 midpoints use the average of the
    two bracketing velocity fields (linear in s). A trajectory whose
    velocity touches a masked node is redrawn from |psi|^2 at the current
    snapshot; a non-finite position after that marks it dead.
    """
    constants = constants or ModelConstants()
    check_matching_grids(snapshots)
    if len(snapshots) >= 2:
        h = check_uniform_spacing([f.s for f in snapshots])
    else:
        h = 0.0
    grid = snapshots[0].grid
    ids = np.arange(ensemble.n_traj)
    if ensemble.initial is not None:
        if ensemble.initial.shape[1] != grid.ndim:
            raise ValueError("initial positions do not match grid dimension")
        q = grid.wrap(ensemble.initial)
    else:
        q = sample_positions(snapshots[0], ids, ensemble.seed)
    draws = np.zeros(ensemble.n_traj, dtype=int)
    alive = np.ones(ensemble.n_traj, dtype=bool)
    resampled = 0
    vel = [velocity_field(f, constants, amplitude_floor) for f in snapshots]
    last = len(snapshots) - 1
    records, s_rec = [q.copy()], [snapshots[0].s]

    def v_at(k, pts, mid=False):
        if mid:
            return 0.5 * (interpolate_periodic(vel[k], grid, pts)
                          + interpolate_periodic(vel[k + 1], grid, pts))
        return interpolate_periodic(vel[k], grid, pts)

    for k in range(last):
        if ensemble.integrator == "euler":
            dq = h * v_at(k, q)
        else:
            k1 = v_at(k, q)
            k2 = v_at(k, grid.wrap(q + 0.5 * h * k1), mid=True)
            k3 = v_at(k, grid.wrap(q + 0.5 * h * k2), mid=True)
            k4 = v_at(k + 1, grid.wrap(q + h * k3))
            dq = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        q_new = q + dq
        bad = alive & ~np.all(np.isfinite(q_new), axis=1)
        if bad.any():
            draws[bad] += 1
            for i in np.flatnonzero(bad):
                q_new[i] = sample_positions(snapshots[k + 1], [i], ensemble.seed, int(draws[i]))[0]
            resampled += int(bad.sum())
        still_bad = ~np.all(np.isfinite(q_new), axis=1)
        alive &= ~still_bad
        q_new[~alive] = np.nan
        q = np.where(alive[:, None], grid.wrap(np.nan_to_num(q_new)), np.nan)
        if (k + 1) % ensemble.record_stride == 0 or k + 1 == last:
            records.append(q.copy())
            s_rec.append(snapshots[k + 1].s)
    return replace(ensemble, positions=np.array(records), s=np.array(s_rec),
                   resampled=resampled, dead=int((~alive).sum()))


def ks_distance(samples: np.ndarray, cdf) -> float:
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    return float(stats.kstest(samples, cdf).statistic)


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Exact one-sample KS critical distance at level ``alpha``."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def equivariance_test(snapshots: Sequence[WaveField], ensemble: TrajectoryEnsemble) -> EquivarianceReport:
    """KS distance between trajectory positions and |psi|^2 at each recorded snapshot.

    For D > 1 the statistic is the largest of the per-axis marginal distances.
    """
    if ensemble.positions is None:
        raise ValueError("ensemble has not been integrated")
    by_s = {round(f.s, 12): f for f in snapshots}
    ks = []
    for rec, s in zip(ensemble.positions, ensemble.s):
        field = by_s.get(round(float(s), 12))
        if field is None:
            raise ValueError(f"no snapshot at s={s}")
        ks.append(max(ks_distance(rec[:, a], marginal_cdf(field, a)) for a in range(field.grid.ndim)))
    return EquivarianceReport(np.asarray(ensemble.s), np.array(ks), ensemble.n_traj)
