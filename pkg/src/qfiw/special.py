"""Principal-branch complex log-Gamma via the Lanczos approximation."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

_G = 7.0
_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _lanczos(z):
    # valid for Re z >= 0.5
    zm = z - 1.0
    a = np.full(zm.shape, _COEF[0], dtype=complex)
    for k in range(1, len(_COEF)):
        a = a + _COEF[k] / (zm + k)
    t = zm + _G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(a)


def log_gamma_complex(z):
    """``log Gamma(z)`` on the principal branch (cut along the negative real axis).

    Accepts scalars or arrays. Points with ``Re z < 1/2`` are shifted up
    with ``log Gamma(z) = log Gamma(z + m) - sum_k log(z + k)``, which keeps
    the principal branch.

    Raises
    ------
    DomainError
        If any ``z`` is a non-positive integer (a pole of Gamma).
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    re = z.real
    at_pole = (z.imag == 0) & (re <= 0) & (re == np.round(re))
    if at_pole.any():
        raise DomainError(f"Gamma has a pole at z = {z[at_pole][0].real:g}")
    shift = np.where(re < 0.5, np.ceil(0.5 - re), 0.0).astype(int)
    zs = z + shift
    out = _lanczos(zs)
    for k in range(int(shift.max(initial=0))):
        active = shift > k
        out[active] -= np.log(z[active] + k)
    return out[0] if scalar else out


def gamma_complex(z):
    return np.exp(log_gamma_complex(z))
