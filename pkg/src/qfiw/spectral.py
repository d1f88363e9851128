"""Lehmann-representation dynamic structure factors and their transforms.

Conventions used throughout:

* ``S(q, w) = (1/N) sum_ij p_i |<j|O_q|i>|^2 delta(w - (E_j - E_i))``,
  so positive frequencies are energy gains of the system and the spectrum
  obeys ``S(-w) = exp(-beta w) S(w)``.
* ``chi''(q, w) = pi (1 - exp(-beta w)) S(q, w)``.
* Gridded spectra are densities per unit frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ValidationError
from .lattice import (
    EigenSystem,
    OperatorSpec,
    ThermalEnsemble,
    operator_matrix,
    sz_correlations,
)

OMEGA_MERGE = 1e-9
ELASTIC_THRESHOLD = 1e-9
NORMALIZATIONS = ("absolute", "per_2pi")


@dataclass(frozen=True)
class LineSpectrum:
    """Discrete poles of S(q, w) at fixed q and beta, sorted by frequency."""

    q: float
    beta: float
    omega: np.ndarray
    weight: np.ndarray
    n_sites: int
    elastic: np.ndarray

    @property
    def includes_elastic(self) -> bool:
        return bool(self.elastic.any())

    @property
    def elastic_weight(self) -> float:
        return float(self.weight[self.elastic].sum())

    def __len__(self):
        return len(self.omega)


@dataclass(frozen=True)
class SpectralGrid:
    q: float
    beta: float
    omega: np.ndarray
    values: np.ndarray
    eta: float = 0.0
    normalization: str = "absolute"

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)
        if omega.ndim != 1 or omega.shape != values.shape:
            raise ValidationError("omega and values must be 1-D arrays of equal length")
        if len(omega) < 2:
            raise ValidationError("a spectral grid needs at least two points")
        steps = np.diff(omega)
        if np.any(steps <= 0):
            raise ValidationError("omega grid must be strictly ascending")
        span = omega[-1] - omega[0]
        if np.max(np.abs(steps - span / (len(omega) - 1))) > 1e-12 * max(span, np.abs(omega).max()):
            raise ValidationError("omega grid is not uniform")
        if not np.all(np.isfinite(values)):
            raise ValidationError("spectral values must be finite")
        if np.any(values < 0):
            raise ValidationError(f"spectral values must be >= 0 (min {values.min():.3g})")
        if self.eta < 0:
            raise ValidationError("broadening eta must be >= 0")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"normalization must be one of {NORMALIZATIONS}")

    @property
    def step(self) -> float:
        return float((self.omega[-1] - self.omega[0]) / (len(self.omega) - 1))

    @property
    def total_weight(self) -> float:
        return float(np.trapezoid(self.to_absolute().values, self.omega))

    def to_absolute(self) -> "SpectralGrid":
        # per_2pi data integrate to S/(2 pi) over the momentum circle
        if self.normalization == "absolute":
            return self
        return replace(self, values=self.values * 2 * math.pi, normalization="absolute")

    def scaled(self, factor: float) -> "SpectralGrid":
        return replace(self, values=self.values * factor)


def _merge_poles(omega: np.ndarray, weight: np.ndarray, tol: float):
    order = np.argsort(omega, kind="stable")
    omega, weight = omega[order], weight[order]
    if len(omega) == 0:
        return omega, weight
    starts = np.concatenate(([0], np.nonzero(np.diff(omega) >= tol)[0] + 1))
    counts = np.diff(np.append(starts, len(omega)))
    w = np.add.reduceat(weight, starts)
    om = np.add.reduceat(omega, starts) / counts
    return om, w


def lehmann_dsf(
    es: EigenSystem,
    ens: ThermalEnsemble,
    op: OperatorSpec,
    matrices=None,
    omega_merge: float = OMEGA_MERGE,
) -> LineSpectrum:
    """Exact pole list of S(q, w) from the eigensystem."""
    if op.n_sites != es.n_sites:
        raise ValidationError("operator and eigensystem disagree on n_sites")
    if matrices is None:
        matrices = operator_matrix(es, op)
    oms, ws = [], []
    for s, p in zip(es.sectors, ens.weights):
        m2 = np.abs(matrices[s.n_up]) ** 2
        # transition i -> j: frequency E_j - E_i, weight p_i |<j|O|i>|^2
        oms.append((s.energies[None, :] - s.energies[:, None]).ravel())
        ws.append((p[:, None] * m2.T).ravel())
    omega = np.concatenate(oms)
    weight = np.concatenate(ws) / es.n_sites
    keep = weight > 1e-24
    omega, weight = _merge_poles(omega[keep], weight[keep], omega_merge)
    elastic = np.abs(omega) < ELASTIC_THRESHOLD
    return LineSpectrum(op.q, ens.beta, omega, weight, es.n_sites, elastic)


def static_structure(spectrum) -> float:
    """S(q): total spectral weight of a line spectrum or integral of a grid."""
    if isinstance(spectrum, SpectralGrid):
        return spectrum.total_weight
    return float(spectrum.weight.sum())


def static_structure_direct(es: EigenSystem, ens: ThermalEnsemble, op: OperatorSpec) -> float:
    """``(1/N) sum_xy exp(-iq(x-y)) <S^z_x S^z_y>`` from thermal correlations."""
    corr = sz_correlations(es, ens)
    phases = op.phases
    return float((phases.conj() @ corr @ phases).real / es.n_sites)


def fdt_factor(omega, beta: float) -> np.ndarray:
    """``pi (1 - exp(-beta w))``, clipped to stay finite for large negative beta*w."""
    x = np.clip(beta * np.asarray(omega, dtype=float), -700.0, None)
    return -math.pi * np.expm1(-x)


def chi_imag_from_dsf(spectrum) -> np.ndarray:
    """chi'' aligned with ``spectrum.omega`` (pole weights or grid values)."""
    vals = spectrum.weight if isinstance(spectrum, LineSpectrum) else spectrum.to_absolute().values
    out = fdt_factor(spectrum.omega, spectrum.beta) * vals
    out[vals == 0] = 0.0
    return out


def detailed_balance_residual(ls: LineSpectrum, tol: float = 1e-8) -> float:
    """Largest ``|S(-w) - exp(-beta w) S(w)|`` over all inelastic poles."""
    pos = ls.omega > ELASTIC_THRESHOLD
    neg = ls.omega < -ELASTIC_THRESHOLD
    om_p, w_p = ls.omega[pos], ls.weight[pos]
    om_n, w_n = ls.omega[neg], ls.weight[neg]
    expected = w_p * np.exp(-ls.beta * om_p)
    if len(om_n) == 0:
        return float(np.max(expected, initial=0.0))
    idx = np.searchsorted(om_n, -om_p)
    lo = np.clip(idx - 1, 0, len(om_n) - 1)
    hi = np.clip(idx, 0, len(om_n) - 1)
    use_hi = np.abs(om_n[hi] + om_p) <= np.abs(om_n[lo] + om_p)
    j = np.where(use_hi, hi, lo)
    found = np.abs(om_n[j] + om_p) < tol
    mirror = np.where(found, w_n[j], 0.0)
    worst = float(np.max(np.abs(mirror - expected), initial=0.0))
    unmatched = np.ones(len(om_n), dtype=bool)
    unmatched[j[found]] = False
    if unmatched.any():
        worst = max(worst, float(w_n[unmatched].max()))
    return worst


def broaden(
    ls: LineSpectrum,
    eta: float,
    omega_min: float = -5.0,
    omega_max: float = 5.0,
    step: float = 0.005,
    exclude_elastic: bool = False,
) -> SpectralGrid:
    """Gaussian broadening equivalent to damping G(x, t) by ``exp(-eta t^2)``.

    The frequency-domain kernel is a normalized Gaussian of width
    ``sigma = sqrt(2 eta)``.
    """
    if not eta > 0:
        raise ValidationError(f"eta must be > 0, got {eta}")
    n = int(round((omega_max - omega_min) / step)) + 1
    grid = np.linspace(omega_min, omega_min + (n - 1) * step, n)
    sigma = math.sqrt(2 * eta)
    om, w = ls.omega, ls.weight
    if exclude_elastic:
        om, w = om[~ls.elastic], w[~ls.elastic]
    total = float(w.sum())
    inside = ndtr((grid[-1] - om) / sigma) - ndtr((grid[0] - om) / sigma)
    lost = float(np.sum(w * (1 - inside)))
    if total > 0 and lost > 1e-6 * total:
        raise ValidationError(
            f"frequency grid [{grid[0]}, {grid[-1]}] too narrow for sigma={sigma:.4g}: "
            f"loses spectral mass {lost:.3e} of {total:.6g}"
        )
    values = np.zeros(n)
    norm = 1.0 / (sigma * math.sqrt(2 * math.pi))
    chunk = max(1, 4_000_000 // n)
    for start in range(0, len(om), chunk):
        o, ww = om[start:start + chunk], w[start:start + chunk]
        values += np.exp(-0.5 * ((grid[:, None] - o[None, :]) / sigma) ** 2) @ ww
    values *= norm
    return SpectralGrid(ls.q, ls.beta, grid, values, eta, "absolute")


@dataclass(frozen=True)
class SumRuleReport:
    integral: float
    expected: float
    n_momenta: int

    @property
    def deviation(self) -> float:
        return self.integral - self.expected


def momentum_set(n_sites: int) -> np.ndarray:
    return 2 * math.pi * np.arange(n_sites) / n_sites


def _check_full_momentum_set(qs: Sequence[float], n_sites: int):
    if len(qs) != n_sites:
        raise ValidationError(
            f"incomplete momentum set: got {len(qs)} wavenumbers, need all {n_sites} lattice momenta"
        )
    ks = sorted(round(q * n_sites / (2 * math.pi)) % n_sites for q in qs)
    for q in qs:
        k = q * n_sites / (2 * math.pi)
        if abs(k - round(k)) > 1e-9:
            raise ValidationError(f"q={q} is not a lattice momentum of a {n_sites}-site chain")
    if ks != list(range(n_sites)):
        raise ValidationError("incomplete momentum set: duplicated or missing lattice momenta")


def sum_rule_check(spectra: Iterable, expected: float = 0.25) -> SumRuleReport:
    """Momentum-averaged total weight, ``(1/N) sum_q S(q)``.

    This is the lattice form of the moment integral over ``q`` in units of
    ``2 pi``; for spin 1/2 and one spin component it equals 1/4.
    """
    spectra = list(spectra)
    if not spectra:
        raise ValidationError("incomplete momentum set: no spectra given")
    n = spectra[0].n_sites if isinstance(spectra[0], LineSpectrum) else len(spectra)
    _check_full_momentum_set([s.q for s in spectra], n)
    total = sum(static_structure(s) for s in spectra) / n
    return SumRuleReport(float(total), expected, n)
