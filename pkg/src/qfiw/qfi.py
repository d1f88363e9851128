"""Quantum Fisher information of thermal states and the witnesses built on it.

The QFI density is computed two independent ways, from the eigenbasis
definition and from the spectral integral over S(q, w), and decomposed as
``f_Q = 4 S(q) - epsilon``. A density ``f_Q > k`` certifies at least
(k+1)-partite entanglement; once ``epsilon < 1`` the static structure factor
alone certifies k-partite entanglement through ``4 S(q) > k``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import expit

from .errors import DomainError, ValidationError
from .lattice import EigenSystem, OperatorSpec, ThermalEnsemble, operator_matrix
from .spectral import LineSpectrum, SpectralGrid, static_structure

ROUTES = ("direct", "spectral", "cft")


def qfi_direct(es: EigenSystem, ens: ThermalEnsemble, op: OperatorSpec, matrices=None) -> float:
    """``F_Q / N`` with ``F_Q = 2 sum_{i != j} (p_i - p_j)^2 / (p_i + p_j) |O_ij|^2``."""
    if matrices is None:
        matrices = operator_matrix(es, op)
    total = 0.0
    for s, p in zip(es.sectors, ens.weights):
        m2 = np.abs(matrices[s.n_up]) ** 2
        psum = p[:, None] + p[None, :]
        pdiff = p[:, None] - p[None, :]
        mask = psum > 1e-300
        np.fill_diagonal(mask, False)
        total += np.sum(pdiff[mask] ** 2 / psum[mask] * m2[mask])
    return 2.0 * total / es.n_sites


def _qfi_kernel(omega, beta):
    # tanh(x/2) (1 - e^-x), saturating cleanly for large x
    x = beta * np.asarray(omega, dtype=float)
    return np.tanh(0.5 * x) * -np.expm1(-np.minimum(x, 700.0))


def _positive_part(grid: SpectralGrid):
    g = grid.to_absolute()
    mask = g.omega >= 0
    return g.omega[mask], g.values[mask]


def qfi_spectral(spectrum) -> float:
    """``4 int_0^inf dw tanh(beta w / 2) (1 - exp(-beta w)) S(w)``.

    Line spectra are summed exactly over their positive inelastic poles;
    elastic poles drop out because the kernel vanishes at w = 0. Grids are
    integrated with the trapezoid rule over ``w >= 0``.
    """
    if isinstance(spectrum, SpectralGrid):
        om, s = _positive_part(spectrum)
        if len(om) < 2:
            return 0.0
        return float(4.0 * np.trapezoid(_qfi_kernel(om, spectrum.beta) * s, om))
    sel = (spectrum.omega > 0) & ~spectrum.elastic
    return float(4.0 * np.sum(_qfi_kernel(spectrum.omega[sel], spectrum.beta) * spectrum.weight[sel]))


def epsilon_correction(spectrum, inelastic_witness: bool = False) -> float:
    """``epsilon = 16 int_0^inf dw S(w) / (1 + exp(beta w))``.

    The half-line integral takes half of any elastic delta at w = 0, which
    contributes ``4 * elastic_weight``; this keeps ``4 S - epsilon = f_Q``
    exact when S(q) includes the elastic weight. With
    ``inelastic_witness=True`` the elastic term is dropped, matching an
    S(q) from which Bragg weight has been removed.
    """
    if isinstance(spectrum, SpectralGrid):
        om, s = _positive_part(spectrum)
        if len(om) < 2:
            return 0.0
        return float(16.0 * np.trapezoid(expit(-spectrum.beta * om) * s, om))
    sel = (spectrum.omega > 0) & ~spectrum.elastic
    eps = 16.0 * np.sum(expit(-spectrum.beta * spectrum.omega[sel]) * spectrum.weight[sel])
    if not inelastic_witness:
        eps += 4.0 * spectrum.elastic_weight
    return float(eps)


def inelastic_static_structure(ls: LineSpectrum) -> float:
    return float(ls.weight[~ls.elastic].sum())


def quadrature_error(grid: SpectralGrid) -> float:
    """Trapezoid vs Simpson disagreement of the grid QFI integral."""
    from scipy.integrate import simpson

    om, s = _positive_part(grid)
    if len(om) < 3:
        return 0.0
    y = 4.0 * _qfi_kernel(om, grid.beta) * s
    return float(abs(np.trapezoid(y, om) - simpson(y, x=om)))


def witnessed_depth(value: float, mode: str = "qfi", atol: float = 1e-9) -> int:
    """Entanglement depth certified by ``f_Q`` (``mode="qfi"``) or ``4 S(q)`` (``"static"``).

    qfi: ``1 + max{k >= 0 : f_Q > k}``.  static: ``max{k >= 1 : 4S > k}``.
    The bounds are strict, so a value within ``atol`` of an integer does not
    exceed it. Both results are lower bounds only.
    """
    if math.isnan(value) or value < 0:
        raise ValidationError(f"witness value must be >= 0, got {value}")
    k = math.ceil(value - atol) - 1
    if mode == "qfi":
        return max(k, 0) + 1
    if mode == "static":
        return max(k, 1)
    raise ValidationError(f"mode must be 'qfi' or 'static', got {mode!r}")


def bounding_k(value: float, mode: str = "qfi") -> int:
    """The integer k in the strict bound ``value > k`` behind the reported depth."""
    d = witnessed_depth(value, mode)
    return d - 1 if mode == "qfi" else d


def divisor_warning(value: float, n_sites: Optional[int], mode: str = "qfi") -> bool:
    """True when the bound's k does not divide N, where the simple bound is not proven."""
    if not n_sites:
        return False
    k = bounding_k(value, mode)
    return k > 1 and n_sites % k != 0


@dataclass
class QfiReport:
    f_q: float
    s_q_times4: float
    epsilon: float
    depth_qfi: int
    depth_static: int
    beta: float
    route: str
    elastic_excluded: bool
    q: Optional[float] = None
    n_sites: Optional[int] = None
    divisor_warning: bool = False
    quadrature_error: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["extras"]:
            d.pop("extras")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def make_report(
    f_q: float,
    s_q: float,
    epsilon: float,
    beta: float,
    route: str,
    elastic_excluded: bool = True,
    q: Optional[float] = None,
    n_sites: Optional[int] = None,
    quadrature_error: Optional[float] = None,
) -> QfiReport:
    if route not in ROUTES:
        raise ValidationError(f"route must be one of {ROUTES}")
    f_q = max(float(f_q), 0.0)
    s4 = 4.0 * float(s_q)
    return QfiReport(
        f_q=f_q,
        s_q_times4=s4,
        epsilon=float(epsilon),
        depth_qfi=witnessed_depth(f_q, "qfi"),
        depth_static=witnessed_depth(max(s4, 0.0), "static"),
        beta=float(beta),
        route=route,
        elastic_excluded=elastic_excluded,
        q=q,
        n_sites=n_sites,
        divisor_warning=divisor_warning(f_q, n_sites, "qfi") or divisor_warning(max(s4, 0.0), n_sites, "static"),
        quadrature_error=quadrature_error,
    )


def spectral_report(spectrum, n_sites: Optional[int] = None, inelastic_witness: bool = False) -> QfiReport:
    """Report for the spectral route on a line spectrum or a grid."""
    if isinstance(spectrum, LineSpectrum):
        s_q = inelastic_static_structure(spectrum) if inelastic_witness else static_structure(spectrum)
        return make_report(
            qfi_spectral(spectrum), s_q, epsilon_correction(spectrum, inelastic_witness),
            spectrum.beta, "spectral", True, spectrum.q, spectrum.n_sites,
        )
    return make_report(
        qfi_spectral(spectrum), static_structure(spectrum), epsilon_correction(spectrum),
        spectrum.beta, "spectral", True, spectrum.q, n_sites, quadrature_error(spectrum),
    )


@dataclass(frozen=True)
class TqResult:
    t_q: float
    crossed: bool
    monotone: bool


def t_q_solve(
    epsilon_of_t: Callable[[float], float],
    bracket: Tuple[float, float],
    n_samples: int = 24,
    rtol: float = 1e-4,
) -> TqResult:
    """Temperature where ``epsilon(T) = 1``, by sampling then bisection.

    Samples are log-spaced over the bracket. The first sign change of
    ``epsilon - 1`` scanning upward in T is refined by bisection. Without a
    crossing, the upper endpoint is returned if epsilon stays below 1 (the
    static witness holds throughout) and the lower endpoint otherwise.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValidationError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    ts = np.geomspace(lo, hi, n_samples)
    eps = np.array([epsilon_of_t(t) for t in ts])
    monotone = bool(np.all(np.diff(eps) >= -1e-12 * np.maximum(1.0, np.abs(eps[1:]))))
    if not monotone:
        warnings.warn("epsilon(T) is not nondecreasing on the bracket; using the first crossing", stacklevel=2)
    g = eps - 1.0
    for i in range(n_samples - 1):
        if g[i] == 0:
            return TqResult(float(ts[i]), True, monotone)
        if g[i] * g[i + 1] < 0:
            a, b, ga = ts[i], ts[i + 1], g[i]
            while (b - a) > rtol * a:
                m = 0.5 * (a + b)
                gm = epsilon_of_t(m) - 1.0
                if gm == 0:
                    return TqResult(float(m), True, monotone)
                if (gm < 0) == (ga < 0):
                    a, ga = m, gm
                else:
                    b = m
            return TqResult(float(0.5 * (a + b)), True, monotone)
    if g[-1] == 0:
        return TqResult(hi, True, monotone)
    return TqResult(hi if np.all(g < 0) else lo, False, monotone)


@dataclass(frozen=True)
class CriticalExponents:
    nu: float
    eta_anom: float
    z: float
    delta_op: float
    amplitude_a: float = 1.0
    universal_d: float = 1.0

    def __post_init__(self):
        if not self.z > 0:
            raise ValidationError(f"dynamical exponent z must be > 0, got {self.z}")

    @property
    def delta_q(self) -> float:
        return 1.0 - 2.0 * self.delta_op

    def _tq_exponent(self) -> float:
        if self.eta_anom == 1:
            raise DomainError("scaling form breaks down for eta = 1 (e.g. the Heisenberg chain)")
        p = (1.0 - self.eta_anom) * self.nu - 1.0
        if p == 0:
            raise DomainError("(1 - eta) * nu = 1: T_Q exponent is undefined")
        return p


def epsilon_universal(ce: CriticalExponents, t: float) -> float:
    """``A D / T^((1 - eta) nu - 1)``."""
    return ce.amplitude_a * ce.universal_d / t ** ce._tq_exponent()


def t_q_universal(ce: CriticalExponents) -> float:
    """``(A D)^(1 / ((1 - eta) nu - 1))``."""
    p = ce._tq_exponent()
    return (ce.amplitude_a * ce.universal_d) ** (1.0 / p)


@dataclass(frozen=True)
class PowerLawScaling:
    delta_q: float
    exponent: float
    scale: float
    sub_power_law: bool


def power_law_qfi_scaling(ce: CriticalExponents, t: float) -> PowerLawScaling:
    """Skeleton ``f_Q ~ T^(-Delta_Q / z)``; the universal prefactor is not modelled."""
    dq = ce.delta_q
    exponent = -dq / ce.z
    sub = dq == 0
    if sub:
        warnings.warn("Delta_Q = 0: sub-power-law regime, use the log-scaling fit", stacklevel=2)
    return PowerLawScaling(dq, exponent, float(t) ** exponent, sub)
