"""Space-time correlation tables and spectral CSV files.

Correlation CSV::

    # n_sites=<int> center=<int> dt=<float> tmax=<float> beta=<float>
    x,t,re,im
    0,0,0.25,0
    ...

Spectral CSV::

    # q=<float> beta=<float> eta=<float> norm=<absolute|per_2pi>
    omega,value
    ...

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .lattice import EigenSystem, ThermalEnsemble, site_sz
from .spectral import SpectralGrid, _check_full_momentum_set

log = logging.getLogger(__name__)

DEFAULT_OMEGA = (-5.0, 5.0, 0.005)


@dataclass(frozen=True)
class CorrelationTable:
    """``G(x, t) = <S^z_x(t) S^z_c(0)>`` on a rectangular (site, time) grid."""

    n_sites: int
    center: int
    dt: float
    t_max: float
    beta: float
    values: np.ndarray  # complex, shape (n_sites, n_times)

    def __post_init__(self):
        if self.n_sites < 1 or not 0 <= self.center < self.n_sites:
            raise ValidationError("center must be a site index in [0, n_sites)")
        if not (self.dt > 0 and self.t_max >= 0):
            raise ValidationError("need dt > 0 and t_max >= 0")
        n_t = self.n_times
        if abs(n_t - 1 - self.t_max / self.dt) > 1e-9 * max(1.0, n_t):
            raise ValidationError(f"t_max={self.t_max} is not a multiple of dt={self.dt}")
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.n_sites, n_t):
            raise ValidationError(f"values must have shape {(self.n_sites, n_t)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("correlation table contains NaN or inf")
        g0 = vals[self.center, 0]
        if abs(g0.imag) > 1e-10 * max(1.0, abs(g0.real)):
            raise ValidationError(f"G(c, 0) must be real, got {g0}")

    @property
    def n_times(self) -> int:
        return int(round(self.t_max / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_times) * self.dt


_HEADER_RE = re.compile(r"(\w+)=(\S+)")


def _parse_header(line: str, path, required: Sequence[str]) -> Dict[str, str]:
    if not line.startswith("#"):
        raise ValidationError(f"{path}: first line must be a '# key=value ...' header")
    fields = dict(_HEADER_RE.findall(line))
    missing = [k for k in required if k not in fields]
    if missing:
        raise ValidationError(f"{path}: header is missing {', '.join(missing)}")
    return fields


def _float(fields, key, path):
    try:
        return float(fields[key])
    except ValueError:
        raise ValidationError(f"{path}: header field {key}={fields[key]!r} is not a number") from None


def load_correlations(path) -> CorrelationTable:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty file")
    hdr = _parse_header(lines[0], path, ("n_sites", "center", "dt", "tmax", "beta"))
    try:
        n_sites, center = int(hdr["n_sites"]), int(hdr["center"])
    except ValueError:
        raise ValidationError(f"{path}: n_sites and center must be integers") from None
    dt, tmax, beta = (_float(hdr, k, path) for k in ("dt", "tmax", "beta"))
    if not dt > 0:
        raise ValidationError(f"{path}: dt must be > 0")
    n_t = int(round(tmax / dt)) + 1
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("#")]
    if body and body[0].replace(" ", "").lower() == "x,t,re,im":
        body = body[1:]
    vals = np.full((n_sites, n_t), np.nan + 0j, dtype=complex)
    seen = np.zeros((n_sites, n_t), dtype=bool)
    for lineno, row in enumerate(csv.reader(body), start=1):
        if len(row) != 4:
            raise ValidationError(f"{path}: data row {lineno} has {len(row)} fields, expected 4 (x,t,re,im)")
        try:
            x, t, re_, im_ = int(row[0]), float(row[1]), float(row[2]), float(row[3])
        except ValueError as exc:
            raise ValidationError(f"{path}: data row {lineno}: {exc}") from None
        if not math.isfinite(t):
            raise ValidationError(f"{path}: data row {lineno}: time {t} is off the declared grid")
        k = int(round(t / dt))
        if not 0 <= x < n_sites or not 0 <= k < n_t or abs(t - k * dt) > 1e-9 * max(dt, abs(t)):
            raise ValidationError(f"{path}: data row {lineno}: (x={x}, t={t}) is off the declared grid")
        if seen[x, k]:
            raise ValidationError(f"{path}: duplicate cell (x={x}, t={t})")
        if math.isnan(re_) or math.isnan(im_):
            raise ValidationError(f"{path}: NaN value at (x={x}, t={t})")
        seen[x, k] = True
        vals[x, k] = complex(re_, im_)
    if not seen.all():
        miss = np.argwhere(~seen)
        cells = ", ".join(f"(x={x}, t={k * dt:g})" for x, k in miss[:20])
        more = f" and {len(miss) - 20} more" if len(miss) > 20 else ""
        raise ValidationError(f"{path}: missing cells {cells}{more}")
    return CorrelationTable(n_sites, center, dt, tmax, beta, vals)


def save_correlations(tab: CorrelationTable, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# n_sites={tab.n_sites} center={tab.center} dt={tab.dt!r} "
            f"tmax={tab.t_max!r} beta={tab.beta!r}\n"
        )
        fh.write("x,t,re,im\n")
        times = tab.times
        for x in range(tab.n_sites):
            for k, t in enumerate(times):
                g = tab.values[x, k]
                fh.write(f"{x},{t:.17g},{g.real:.17g},{g.imag:.17g}\n")


def correlations_from_eigensystem(
    es: EigenSystem, ens: ThermalEnsemble, center: int, dt: float = 0.1, t_max: float = 50.0
) -> CorrelationTable:
    """Exact ``<S^z_x(t) S^z_c(0)>`` from eigen-data.

    ``G(x, t) = sum_ij p_i <i|S^z_x|j> <j|S^z_c|i> exp(i (E_i - E_j) t)``.
    """
    n = es.n_sites
    n_t = int(round(t_max / dt)) + 1
    times = np.arange(n_t) * dt
    g = np.zeros((n, n_t), dtype=complex)
    for s, p in zip(es.sectors, ens.weights):
        sz = site_sz(s.states, n)
        v = s.vectors
        b = v.T @ (sz[:, center][:, None] * v)
        freq = (s.energies[:, None] - s.energies[None, :]).ravel()
        phase = np.exp(1j * np.outer(freq, times))
        for x in range(n):
            a = v.T @ (sz[:, x][:, None] * v)
            amp = (p[:, None] * a * b.T).ravel()
            g[x] += amp @ phase
    return CorrelationTable(n, center, float(dt), float(t_max), float(ens.beta), g)


@dataclass(frozen=True)
class TransformReport:
    eta_requested: float
    eta_used: float
    negativity: float
    clipped_mass: float


def _transform(tab: CorrelationTable, q: float, eta: float, omega: np.ndarray) -> np.ndarray:
    x = np.arange(tab.n_sites)
    c_t = np.cos(q * (x - tab.center)) @ tab.values
    t = tab.times
    w = np.full(len(t), tab.dt)
    w[0] = w[-1] = 0.5 * tab.dt
    damp = w * np.exp(-eta * t ** 2)
    arg = np.outer(omega, t)
    # (1/pi) int_0^inf dt [cos(wt) Re C - sin(wt) Im C] e^{-eta t^2}
    return (np.cos(arg) @ (damp * c_t.real) - np.sin(arg) @ (damp * c_t.imag)) / math.pi


def transform_to_dsf(
    tab: CorrelationTable,
    q: float,
    eta: float = 0.01,
    omega_range: Tuple[float, float, float] = DEFAULT_OMEGA,
    max_escalations: int = 4,
    negativity_tol: float = 1e-6,
) -> Tuple[SpectralGrid, TransformReport]:
    """Positive-time transform of ``G(x, t)`` to ``S(q, w)``.

    The table is damped by ``exp(-eta t^2)``. If the negative part of the
    spectrum carries more than ``negativity_tol`` of the positive mass, eta
    is doubled (at most ``max_escalations`` times). Remaining negative
    values are then reported and clipped to zero.
    """
    if not eta > 0:
        raise ValidationError(f"eta must be > 0, got {eta}")
    lo, hi, step = omega_range
    n = int(round((hi - lo) / step)) + 1
    omega = np.linspace(lo, lo + (n - 1) * step, n)
    eta_used = eta
    for attempt in range(max_escalations + 1):
        raw = _transform(tab, q, eta_used, omega)
        pos = float(np.trapezoid(np.maximum(raw, 0.0), omega))
        neg = float(np.trapezoid(np.maximum(-raw, 0.0), omega))
        ratio = neg / pos if pos > 0 else 0.0
        if ratio <= negativity_tol or attempt == max_escalations:
            break
        log.info("negativity %.3g at eta=%g; doubling eta", ratio, eta_used)
        eta_used *= 2
    if neg > 0:
        log.info("clipping negative spectral mass %.3g (max |S| below zero: %.3g)", neg, -raw.min())
    grid = SpectralGrid(q, tab.beta, omega, np.maximum(raw, 0.0), eta_used, "absolute")
    return grid, TransformReport(eta, eta_used, ratio, neg)


def normalize_moment(grids: Sequence[SpectralGrid], target: float = 0.25) -> Tuple[List[SpectralGrid], float]:
    """Rescale a full momentum set so that ``(1/N) sum_q int S(q, w) dw = target``.

    Returns the rescaled grids (absolute normalization) and the scale factor.
    """
    grids = [g.to_absolute() for g in grids]
    if len(grids) < 2:
        raise ValidationError("incomplete momentum set: the sum rule needs every lattice momentum")
    _check_full_momentum_set([g.q for g in grids], len(grids))
    total = sum(g.total_weight for g in grids) / len(grids)
    if not total > 0:
        raise ValidationError("total spectral weight is zero; cannot normalize")
    scale = target / total
    return [g.scaled(scale) for g in grids], scale


def remove_elastic(grid: SpectralGrid, window: float) -> Tuple[SpectralGrid, float]:
    """Zero the grid for ``|w| < window`` and return the removed mass."""
    if window < 0:
        raise ValidationError("elastic window must be >= 0")
    if window == 0:
        return grid, 0.0
    mask = np.abs(grid.omega) < window
    values = np.where(mask, 0.0, grid.values)
    removed = float(np.trapezoid(grid.values - values, grid.omega))
    if grid.normalization == "per_2pi":
        removed *= 2 * math.pi
    log.info("removed elastic mass %.6g within |w| < %g", removed, window)
    return replace(grid, values=values), removed


def read_spectral_csv(path) -> SpectralGrid:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty file")
    hdr = _parse_header(lines[0], path, ("q", "beta"))
    q, beta = _float(hdr, "q", path), _float(hdr, "beta", path)
    eta = _float(hdr, "eta", path) if "eta" in hdr else 0.0
    norm = hdr.get("norm", "absolute")
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("#")]
    if body and body[0].replace(" ", "").lower() == "omega,value":
        body = body[1:]
    om, val = [], []
    for lineno, row in enumerate(csv.reader(body), start=1):
        if len(row) != 2:
            raise ValidationError(f"{path}: data row {lineno} has {len(row)} fields, expected 2")
        try:
            om.append(float(row[0]))
            val.append(float(row[1]))
        except ValueError as exc:
            raise ValidationError(f"{path}: data row {lineno}: {exc}") from None
    if np.any(np.isnan(val)):
        raise ValidationError(f"{path}: NaN values")
    return SpectralGrid(q, beta, np.array(om), np.array(val), eta, norm)


def write_spectral_csv(grid: SpectralGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# q={grid.q:.17g} beta={grid.beta:.17g} eta={grid.eta:.17g} norm={grid.normalization}\n"
        )
        fh.write("omega,value\n")
        for o, v in zip(grid.omega, grid.values):
            fh.write(f"{o:.17g},{v:.17g}\n")
