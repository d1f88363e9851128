"""Power-logarithmic scaling fits of the QFI density.

Near the Heisenberg critical point ``f_Q = D log(T0 beta)^{3/2}``, so
``f_Q^{2/3}`` is linear in ``log beta`` with slope ``b = D^{2/3}`` and
intercept ``a = b log T0``. All fits use this linearization.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from .errors import ValidationError
from .qfi import witnessed_depth


@dataclass(frozen=True)
class ScalingSeries:
    beta: np.ndarray
    f_q: np.ndarray
    sigma: Optional[np.ndarray] = None
    excluded: Tuple[float, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        f_q = np.asarray(self.f_q, dtype=float)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "f_q", f_q)
        if beta.shape != f_q.shape or beta.ndim != 1:
            raise ValidationError("beta and f_q must be 1-D arrays of equal length")
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            if sigma.shape != beta.shape:
                raise ValidationError("sigma must match beta in length")
            object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return len(self.beta)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    d_fit: Optional[float]
    t0_fit: Optional[float]
    r_squared: float
    fit_range: Tuple[float, float]
    excluded_points: Tuple[float, ...] = ()
    n_points: int = 0
    weighted: bool = False

    @property
    def diverging(self) -> bool:
        return self.slope > 0

    def predict(self, beta) -> np.ndarray:
        base = self.intercept + self.slope * np.log(np.asarray(beta, dtype=float))
        return np.maximum(base, 0.0) ** 1.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_range"] = list(self.fit_range)
        d["excluded_points"] = list(self.excluded_points)
        return d


def exclude_points(
    series: ScalingSeries,
    predicate: Optional[Callable[[float, float], bool]] = None,
    betas: Iterable[float] = (),
) -> ScalingSeries:
    """Drop points by predicate ``(beta, f_q) -> bool`` or by explicit beta values."""
    drop = np.zeros(len(series), dtype=bool)
    for b in betas:
        hit = np.isclose(series.beta, b, rtol=1e-12, atol=0.0)
        if not hit.any():
            raise ValidationError(f"beta={b} is not in the series")
        drop |= hit
    if predicate is not None:
        drop |= np.array([bool(predicate(b, f)) for b, f in zip(series.beta, series.f_q)], dtype=bool)
    if drop.all():
        raise ValidationError("every point would be excluded")
    keep = ~drop
    return ScalingSeries(
        series.beta[keep],
        series.f_q[keep],
        None if series.sigma is None else series.sigma[keep],
        series.excluded + tuple(float(b) for b in series.beta[drop]),
    )


def exclude_lowest_temperature(series: ScalingSeries) -> ScalingSeries:
    return exclude_points(series, betas=[float(series.beta.max())])


def fit_log_scaling(series: ScalingSeries, beta_min: float = 4.0, weighted: bool = False) -> ScalingFit:
    """Least squares of ``f_Q^{2/3}`` against ``log beta`` for ``beta >= beta_min``.

    With ``weighted=True`` each point is weighted by the propagated
    uncertainty of ``f_Q^{2/3}``, ``(2/3) f_Q^{-1/3} sigma``.
    """
    use = series.beta >= beta_min
    beta, f = series.beta[use], series.f_q[use]
    if len(beta) < 3:
        raise ValidationError(f"need at least 3 points with beta >= {beta_min}, got {len(beta)}")
    if np.any(f <= 0):
        raise ValidationError("f_q must be positive for the f_q^(2/3) linearization")
    x = np.log(beta)
    y = f ** (2.0 / 3.0)
    if weighted:
        if series.sigma is None:
            raise ValidationError("weighted fit requested but the series has no sigma column")
        sig = series.sigma[use]
        if np.any(sig <= 0):
            raise ValidationError("sigma must be positive for a weighted fit")
        w = 1.0 / ((2.0 / 3.0) * f ** (-1.0 / 3.0) * sig) ** 2
    else:
        w = np.ones_like(x)
    design = np.column_stack([np.ones_like(x), x]) * np.sqrt(w)[:, None]
    (a, b), *_ = np.linalg.lstsq(design, y * np.sqrt(w), rcond=None)
    ybar = np.sum(w * y) / np.sum(w)
    if abs(b) <= 1e-12 * max(1.0, abs(ybar)):
        b = 0.0
        a = ybar
    ss_res = float(np.sum(w * (y - a - b * x) ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    # a constant series explains no variance
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    r2 = min(max(r2, 0.0), 1.0)
    if b > 0:
        d_fit, t0_fit = b ** 1.5, math.exp(a / b)
    else:
        d_fit = t0_fit = None
        warnings.warn("non-positive slope: the series does not diverge; D and T0 are undefined", stacklevel=2)
    return ScalingFit(
        float(b), float(a), d_fit, t0_fit, r2,
        (float(beta.min()), float(beta.max())), series.excluded, int(len(beta)), weighted,
    )


def fit_from_constants(d: float, t0: float, fit_range=(4.0, 20.0)) -> ScalingFit:
    """Fit object for given ``D`` and ``T0`` (e.g. literature values)."""
    b = d ** (2.0 / 3.0)
    return ScalingFit(b, b * math.log(t0), d, t0, 1.0, tuple(map(float, fit_range)))


def fit_through_points(points, fit_range=(4.0, 20.0)) -> ScalingFit:
    """Exact two-point solve of the linearized law through ``[(T, f_q), (T, f_q)]``.

    Useful when only two predictions of an external fit are known.
    """
    (t1, f1), (t2, f2) = points
    if not (t1 > 0 and t2 > 0 and f1 > 0 and f2 > 0) or t1 == t2:
        raise ValidationError("need two distinct positive temperatures with positive f_q")
    x1, x2 = math.log(1 / t1), math.log(1 / t2)
    y1, y2 = f1 ** (2 / 3), f2 ** (2 / 3)
    b = (y2 - y1) / (x2 - x1)
    a = y1 - b * x1
    if not b > 0:
        raise ValidationError("points do not describe a diverging law")
    return ScalingFit(b, a, b ** 1.5, math.exp(a / b), 1.0, tuple(map(float, fit_range)))


@dataclass(frozen=True)
class Extrapolation:
    t_target: float
    f_q_pred: float
    depth: int
    extrapolated: bool
    far_extrapolation: bool


def extrapolate(fit: ScalingFit, t_target: float) -> Extrapolation:
    """``f_Q(T) = (a + b log(1/T))^{3/2}`` and the depth it witnesses."""
    if not fit.slope > 0:
        raise ValidationError("cannot extrapolate a non-diverging fit (slope <= 0)")
    if not t_target > 0:
        raise ValidationError("target temperature must be > 0")
    beta = 1.0 / t_target
    lo, hi = fit.fit_range
    outside = not (lo * (1 - 1e-12) <= beta <= hi * (1 + 1e-12))
    far = beta > 10 * hi or beta < lo / 10
    if far:
        warnings.warn(
            f"extrapolating to beta={beta:.4g}, more than 10x beyond the fitted range {fit.fit_range}",
            stacklevel=2,
        )
    f = float(fit.predict(beta))
    return Extrapolation(float(t_target), f, witnessed_depth(f, "qfi"), outside, far)


def load_series(path) -> ScalingSeries:
    """Read ``beta,f_q[,sigma]`` CSV (header row required, ``#`` comments allowed)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if line.strip() and not line.startswith("#"))
        header = [h.strip() for h in next(reader, [])]
        if header[:2] != ["beta", "f_q"] or len(header) > 3 or (len(header) == 3 and header[2] != "sigma"):
            raise ValidationError(f"{path}: expected header 'beta,f_q[,sigma]', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {lineno}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: non-finite values")
    return ScalingSeries(arr[:, 0], arr[:, 1], arr[:, 2] if arr.shape[1] == 3 else None)


def save_series(series: ScalingSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        has_sigma = series.sigma is not None
        fh.write("beta,f_q,sigma\n" if has_sigma else "beta,f_q\n")
        for i in range(len(series)):
            vals = [series.beta[i], series.f_q[i]] + ([series.sigma[i]] if has_sigma else [])
            fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")
