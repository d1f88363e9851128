import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfiw.errors import ValidationError
from qfiw.spectral import (
    LineSpectrum,
    SpectralGrid,
    broaden,
    chi_imag_from_dsf,
    detailed_balance_residual,
    fdt_factor,
    lehmann_dsf,
    momentum_set,
    static_structure,
    static_structure_direct,
    sum_rule_check,
)

from conftest import chain_setup


def single_pole(omega=1.0, weight=0.5, beta=1000.0):
    return LineSpectrum(math.pi, beta, np.array([omega]), np.array([weight]), 2, np.array([abs(omega) < 1e-9]))


def test_two_site_singlet_pole():
    es, ens, op = chain_setup(2, 1000, boundary="open")
    ls = lehmann_dsf(es, ens, op)
    pos = ls.omega > 0
    assert np.allclose(ls.omega[pos], [1.0])
    assert ls.weight[pos][0] == pytest.approx(0.5, abs=1e-12)
    assert static_structure(ls) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_infinite_temperature_weight(n):
    es, ens, op = chain_setup(n, 1e-9, boundary="open")
    assert static_structure(lehmann_dsf(es, ens, op)) == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize("n,beta,q", [(6, 2.0, math.pi), (8, 8.0, math.pi), (8, 0.5, math.pi / 2), (6, 3.0, 2 * math.pi / 3)])
def test_static_routes_agree(n, beta, q):
    es, ens, op = chain_setup(n, beta, q)
    assert static_structure(lehmann_dsf(es, ens, op)) == pytest.approx(static_structure_direct(es, ens, op), abs=1e-12)


@pytest.mark.parametrize("beta", [0.5, 2.0, 16.0])
def test_detailed_balance(beta):
    es, ens, op = chain_setup(8, beta)
    ls = lehmann_dsf(es, ens, op)
    assert detailed_balance_residual(ls) < 1e-10


def test_detailed_balance_detects_violation():
    ls = LineSpectrum(math.pi, 1.0, np.array([-1.0, 1.0]), np.array([0.3, 0.5]), 2, np.array([False, False]))
    assert detailed_balance_residual(ls) == pytest.approx(abs(0.3 - 0.5 * math.exp(-1)))


def test_fdt_pole_weight():
    chi = chi_imag_from_dsf(single_pole())
    assert chi[0] == pytest.approx(math.pi / 2)
    assert chi_imag_from_dsf(single_pole(0.0, 0.3))[0] == 0.0


def test_fdt_high_temperature_linear():
    beta = 1e-6
    assert fdt_factor(0.7, beta) == pytest.approx(math.pi * beta * 0.7, rel=1e-5)
    assert np.isfinite(fdt_factor(-1e6, 10.0))


def test_broaden_single_pole():
    g = broaden(single_pole(), 0.01)
    assert abs(g.omega[np.argmax(g.values)] - 1.0) < g.step
    assert g.total_weight == pytest.approx(0.5, abs=1e-6)


def test_broaden_zero_poles():
    empty = LineSpectrum(0.0, 1.0, np.zeros(0), np.zeros(0), 4, np.zeros(0, dtype=bool))
    assert not broaden(empty, 0.01).values.any()


def test_broaden_narrow_grid_reports_lost_mass():
    with pytest.raises(ValidationError, match="loses spectral mass"):
        broaden(single_pole(4.99), 0.01)


def test_broaden_rejects_nonpositive_eta():
    with pytest.raises(ValidationError):
        broaden(single_pole(), 0.0)


@pytest.mark.parametrize("n,beta", [(4, 1.0), (6, 2.0), (8, 8.0), (8, 0.5)])
def test_sum_rule_exact(n, beta):
    spectra = [lehmann_dsf(*chain_setup(n, beta, q)) for q in momentum_set(n)]
    assert abs(sum_rule_check(spectra).deviation) < 1e-8


def test_sum_rule_after_broadening():
    spectra = [broaden(lehmann_dsf(*chain_setup(6, 2.0, q)), 0.01, -6, 6) for q in momentum_set(6)]
    assert abs(sum_rule_check(spectra).deviation) < 1e-4


def test_sum_rule_rejects_single_q():
    with pytest.raises(ValidationError, match="incomplete"):
        sum_rule_check([lehmann_dsf(*chain_setup(6, 2.0))])


def test_grid_validation():
    with pytest.raises(ValidationError):
        SpectralGrid(0, 1, [0, 1, 3], [0, 0, 0])
    with pytest.raises(ValidationError):
        SpectralGrid(0, 1, [0, 1, 2], [0, -1, 0])
    g = SpectralGrid(0, 1, [0, 1, 2], [1, 1, 1], normalization="per_2pi")
    assert g.total_weight == pytest.approx(4 * math.pi)


@settings(max_examples=20, deadline=None)
@given(omega=st.floats(-3, 3), weight=st.floats(1e-3, 2.0), eta=st.floats(0.002, 0.05))
def test_broadening_conserves_mass(omega, weight, eta):
    g = broaden(single_pole(omega, weight, 1.0), eta, -5, 5, 0.002)
    assert g.total_weight == pytest.approx(weight, rel=1e-6)
