"""Tomonaga-Luttinger-liquid spectra of the Heisenberg chain at q = pi.

Closed-form low-energy expressions with a logarithmically running
exponent ``Delta(T) = (1/4) (1 - 1 / (2 log(T0/T)))``. The non-universal
constants ``D`` and ``T0`` are treated as temperature independent.

Sign convention: the dynamical susceptibility carries a factor
``log(T/T0)^(1/2)`` with ``T < T0``. We use the real branch
``log(T0/T)^(1/2)``, which makes ``chi''(w > 0) > 0``; a negative value at
positive frequency is reported as a :class:`NumericalError`, never flipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, ValidationError
from .qfi import TqResult, t_q_solve, witnessed_depth
from .special import log_gamma_complex

OMEGA_MIN_FACTOR = 1e-8
OMEGA_MAX_FACTOR = 50.0


@dataclass(frozen=True)
class CftParams:
    amplitude_d: float = 0.075
    t0: float = 4.5

    def __post_init__(self):
        if not (self.amplitude_d > 0 and self.t0 > 0):
            raise ValidationError("amplitude_d and t0 must be positive")

    def log_ratio(self, t: float) -> float:
        if not t > 0:
            raise DomainError(f"temperature must be > 0, got {t}")
        if t >= self.t0:
            raise DomainError(f"temperature {t} must be below t0 = {self.t0}")
        return math.log(self.t0 / t)


def delta_eff(t: float, p: CftParams = CftParams()) -> float:
    """Running exponent; tends to 1/4 as T -> 0 and vanishes at ``T0 e^{-1/2}``."""
    return 0.25 * (1.0 - 1.0 / (2.0 * p.log_ratio(t)))


def in_validity_region(t: float, p: CftParams = CftParams()) -> bool:
    return 0 < t < p.t0 * math.exp(-0.5)


def _require_valid(t, p):
    d = delta_eff(t, p)
    if not 0 < d < 0.25:
        raise DomainError(
            f"T = {t} is outside the validity region 0 < T < T0 e^(-1/2) = {p.t0 * math.exp(-0.5):.6g}"
        )
    return d


def chi_imag_cft(omega, t: float, p: CftParams = CftParams()):
    """Dynamical susceptibility chi''(w, q = pi), odd in w."""
    d = _require_valid(t, p)
    lr = p.log_ratio(t)
    w = np.asarray(omega, dtype=float)
    y = np.abs(w) / (4 * math.pi * t)
    pref = 2.0 ** (2 * d - 1.5) * p.amplitude_d / (math.pi * t) * math.sin(2 * math.pi * d) * math.sqrt(lr)
    log_ratio_gamma = log_gamma_complex(d - 1j * y) - log_gamma_complex(1 - d - 1j * y)
    g2 = math.gamma(1 - 2 * d) ** 2
    val = pref * g2 * np.imag(np.exp(2 * log_ratio_gamma))
    if np.any(val < -1e-14 * np.max(np.abs(val), initial=1.0)):
        raise NumericalError(f"chi'' < 0 at positive frequency for T = {t}; sign convention violated")
    out = np.sign(w) * np.maximum(val, 0.0)
    return float(out) if np.ndim(omega) == 0 else out


def dsf_cft(omega, t: float, p: CftParams = CftParams()):
    """``S(w) = chi''(w) / (pi (1 - e^{-w/T}))`` with exact detailed balance.

    Evaluated at ``|w|`` and multiplied by ``e^{-|w|/T}`` for negative
    frequencies. At ``w = 0`` the finite limit is taken from ``w = 1e-8 T``.
    """
    w = np.asarray(omega, dtype=float)
    a = np.maximum(np.abs(w), OMEGA_MIN_FACTOR * t)
    x = a / t
    s = chi_imag_cft(a, t, p) / (-math.pi * np.expm1(-x))
    s = np.where(w < 0, s * np.exp(-x), s)
    return float(s) if np.ndim(omega) == 0 else s


def static_cft(t: float, p: CftParams = CftParams()) -> float:
    """Equal-time staggered structure factor S(pi, T)."""
    d = _require_valid(t, p)
    if 1 - 4 * d <= 0:
        raise DomainError("Delta >= 1/4: Gamma(1 - 4 Delta) pole")
    lr = p.log_ratio(t)
    ratio = math.gamma(1 - 2 * d) / math.gamma(2 * d)
    return 2.0 ** (d + 0.5) * p.amplitude_d * math.sqrt(lr) * math.gamma(1 - 4 * d) * ratio


def epsilon_cft(
    t: float,
    p: CftParams = CftParams(),
    omega_min: float | None = None,
    omega_max: float | None = None,
    rtol: float = 1e-8,
) -> float:
    """``16 int dw S(w) / (1 + e^{w/T})`` over ``[omega_min, omega_max]``.

    Defaults are ``1e-8 T`` and ``50 T``; the Fermi factor makes the mass
    beyond ``50 T`` smaller than ``e^{-50}`` relative.
    """
    _require_valid(t, p)
    lo = OMEGA_MIN_FACTOR * t if omega_min is None else omega_min
    hi = OMEGA_MAX_FACTOR * t if omega_max is None else omega_max
    if not 0 < lo < hi:
        raise ValidationError("need 0 < omega_min < omega_max")

    # integrate in u = w / T
    def f(u):
        return 16.0 * t * dsf_cft(u * t, t, p) / (1.0 + math.exp(u))

    val, err, info = integrate.quad(
        f, lo / t, hi / t, epsabs=0.0, epsrel=rtol, limit=200, points=[1.0, 5.0], full_output=1
    )[:3]
    if err > max(rtol * abs(val), 1e-300) * 10:
        raise NumericalError(
            f"epsilon quadrature did not converge at T={t}: value {val:.6g}, error {err:.3g}, "
            f"{info['neval']} evaluations"
        )
    return float(val)


def qfi_cft(t: float, p: CftParams = CftParams()) -> float:
    """``f_Q = 4 S(pi, T) - epsilon(T)``."""
    return 4.0 * static_cft(t, p) - epsilon_cft(t, p)


def t_q_cft(p: CftParams = CftParams(), bracket=(0.005, 0.2), n_samples: int = 24) -> TqResult:
    return t_q_solve(lambda t: epsilon_cft(t, p), bracket, n_samples=n_samples)


@dataclass(frozen=True)
class CftPoint:
    t: float
    s_pi: float
    epsilon: float
    f_q: float
    depth: int


def cft_curve(temps, p: CftParams = CftParams()):
    out = []
    for t in temps:
        s = static_cft(t, p)
        e = epsilon_cft(t, p)
        f = 4 * s - e
        out.append(CftPoint(float(t), s, e, f, witnessed_depth(max(f, 0.0), "qfi")))
    return out
