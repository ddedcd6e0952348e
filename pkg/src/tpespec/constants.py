"""Physical constants and photon energy/wavelength conversions.

Energies are in eV and optical wavelengths in nm at every public interface.
Rate prefactors work in SI internally.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    e: float = _sc.e  # C
    m0: float = _sc.m_e  # kg
    eps0: float = _sc.epsilon_0  # F/m
    c: float = _sc.c  # m/s
    hbar: float = _sc.hbar  # J s
    kB: float = _sc.k  # J/K

    def __post_init__(self):
        for name in ("e", "m0", "eps0", "c", "hbar", "kB"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be positive")

    @property
    def hc(self) -> float:
        """Planck constant times c in eV nm."""
        return 2 * np.pi * self.hbar * self.c / self.e * 1e9

    @property
    def hbar_eVs(self) -> float:
        return self.hbar / self.e

    @property
    def kB_eV(self) -> float:
        return self.kB / self.e


CONST = PhysicalConstants()

E_CHARGE = CONST.e
M0 = CONST.m0
EPS0 = CONST.eps0
C_LIGHT = CONST.c
HBAR = CONST.hbar
HBAR_EVS = CONST.hbar_eVs
KB_EV = CONST.kB_eV
HC_EVNM = CONST.hc


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


def energy_from_wavelength(wavelength_nm):
    """Photon energy in eV for a vacuum wavelength in nm."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam <= 0):
        raise DomainError(f"wavelength must be positive, got {wavelength_nm!r}")
    out = HC_EVNM / lam
    return float(out) if out.ndim == 0 else out


def wavelength_from_energy(energy_eV):
    """Vacuum wavelength in nm for a photon energy in eV."""
    E = np.asarray(energy_eV, dtype=float)
    if np.any(E <= 0):
        raise DomainError(f"energy must be positive, got {energy_eV!r}")
    out = HC_EVNM / E
    return float(out) if out.ndim == 0 else out


def thermal_energy(T):
    """kT in eV."""
    return KB_EV * T
