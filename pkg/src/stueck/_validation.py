"""Input validation helpers shared across the package."""
from __future__ import annotations

import numbers

import numpy as np


def check_finite_scalar(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_non_negative(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def check_in_interval(value, name: str, lo: float, hi: float, *,
                      closed_lo: bool = False, closed_hi: bool = False) -> float:
    value = check_finite_scalar(value, name)
    ok_lo = value >= lo if closed_lo else value > lo
    ok_hi = value <= hi if closed_hi else value < hi
    if not (ok_lo and ok_hi):
        left = "[" if closed_lo else "("
        right = "]" if closed_hi else ")"
        raise ValueError(f"{name} must lie in {left}{lo}, {hi}{right}, got {value!r}")
    return value


def check_finite_array(values: np.ndarray, name: str = "field", coords=None) -> np.ndarray:
    """Reject arrays with NaN/inf, reporting the first offending node.

    ``coords`` is an optional callable mapping a multi-index to coordinates,
    used only to make the diagnostic readable.
    """
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if bad.any():
        flat = int(np.flatnonzero(bad.ravel())[0])
        idx = np.unravel_index(flat, values.shape)
        where = f"node {tuple(int(i) for i in idx)}"
        if coords is not None:
            where += f" at q={tuple(round(float(c), 12) for c in coords(idx))}"
        raise ValueError(
            f"{name} has non-finite value {values[idx]!r} at {where} "
            f"({int(bad.sum())} non-finite nodes total)"
        )
    return values


def check_matching_grids(fields, name: str = "snapshots") -> None:
    first = fields[0]
    for k, f in enumerate(fields[1:], start=1):
        if f.grid != first.grid or f.metric != first.metric:
            raise ValueError(f"{name}[{k}] is on a different grid/metric than {name}[0]")


def check_uniform_spacing(s_values, name: str = "snapshots", rtol: float = 1e-9) -> float:
    s = np.asarray(s_values, dtype=float)
    if s.size < 2:
        raise ValueError(f"{name} needs at least two entries to define a step")
    steps = np.diff(s)
    ds = float(steps.mean())
    if ds <= 0 or np.max(np.abs(steps - ds)) > rtol * max(abs(ds), 1e-300) + 1e-15:
        raise ValueError(f"{name} must be uniformly spaced in s with increasing values")
    return ds
