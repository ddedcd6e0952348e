import math

import pytest
from hypothesis import given, strategies as st

from tpespec.constants import (
    CONST,
    HC_EVNM,
    DomainError,
    energy_from_wavelength,
    thermal_energy,
    wavelength_from_energy,
)


def test_hc_matches_codata():
    # h c = 1239.841984... eV nm
    assert HC_EVNM == pytest.approx(1239.8419843320026, rel=1e-12)


def test_thermal_energy_at_300K():
    assert thermal_energy(300.0) == pytest.approx(0.025852, rel=1e-4)


@pytest.mark.parametrize("lam, E", [(1530.0, 0.81035), (1630.0, 0.76064), (1310.0, 0.94645), (514.0, 2.41215)])
def test_wavelength_to_energy(lam, E):
    assert energy_from_wavelength(lam) == pytest.approx(E, abs=5e-5)


@given(st.floats(min_value=100.0, max_value=1e5))
def test_round_trip(lam):
    assert wavelength_from_energy(energy_from_wavelength(lam)) == pytest.approx(lam, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_non_positive_rejected(bad):
    with pytest.raises(DomainError):
        energy_from_wavelength(bad)
    with pytest.raises(DomainError):
        wavelength_from_energy(bad)


def test_constants_positive():
    for v in (CONST.e, CONST.m0, CONST.eps0, CONST.c, CONST.hbar, CONST.kB):
        assert v > 0 and math.isfinite(v)
