"""Quasi-Fermi statistics, occupation factors and bandgap renormalization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import expit

from .calibration_data import frozen_calibration
from .constants import HBAR, KB_EV, M0, E_CHARGE, DomainError
from .materials import MaterialParams, bandgap

# Joyce & Dixon, Appl. Phys. Lett. 31, 354 (1977)
JOYCE_DIXON_COEFFS = (3.53553e-1, -4.95009e-3, 1.48386e-4, -4.42563e-6)
JD_MAX_U = 10.0

DEFAULT_GAMMA = 1e13  # s^-1, 100 fs decoherence time

# 100 mW into a 30 um spot gives 1.2e18 cm^-3
PUMP_KAPPA = 1.2e18 * math.pi * (15e-4) ** 2 / 0.1  # cm^-1 W^-1
PUMP_MAX_W = 0.25


class ValidityError(DomainError):
    """Input outside the validity range of an approximation."""


def effective_dos(mass: float, T: float) -> float:
    """3D effective band-edge density of states in cm^-3."""
    kT = KB_EV * E_CHARGE * T
    return 2.0 * (mass * M0 * kT / (2 * math.pi * HBAR**2)) ** 1.5 * 1e-6


def effective_dos_2d(mass: float, T: float) -> float:
    """2D density of states times kT (spin included), cm^-2."""
    kT = KB_EV * E_CHARGE * T
    return mass * M0 * kT / (math.pi * HBAR**2) * 1e-4


def joyce_dixon_eta(n: float, N_eff: float) -> float:
    if n <= 0 or N_eff <= 0:
        raise DomainError("densities must be positive")
    u = n / N_eff
    if u > JD_MAX_U:
        raise ValidityError(f"n/N_eff = {u:.3g} > {JD_MAX_U}; use exact_eta")
    return math.log(u) + sum(a * u ** (m + 1) for m, a in enumerate(JOYCE_DIXON_COEFFS))


def fermi_half(eta: float) -> float:
    """Unnormalized Fermi-Dirac integral of order 1/2, by adaptive quadrature."""

    def f(e):
        return math.sqrt(e) * expit(eta - e)

    hi = max(eta, 0.0) + 60.0
    if eta > 0:
        a, _ = integrate.quad(f, 0.0, eta, epsabs=0, epsrel=1e-11, limit=200)
        b, _ = integrate.quad(f, eta, hi, epsabs=0, epsrel=1e-11, limit=200)
        return a + b
    val, _ = integrate.quad(f, 0.0, hi, epsabs=0, epsrel=1e-11, limit=200)
    return val


def density_ratio(eta: float) -> float:
    """n / N_eff for reduced Fermi level eta."""
    return 2.0 / math.sqrt(math.pi) * fermi_half(eta)


def exact_eta(n: float, N_eff: float) -> float:
    """Invert n = N_eff (2/sqrt(pi)) F_1/2(eta) by bracketed root finding."""
    if n <= 0 or N_eff <= 0:
        raise DomainError("densities must be positive")
    u = n / N_eff
    lo, hi = -40.0, 40.0
    if u < density_ratio(lo):
        return math.log(u)
    while density_ratio(hi) < u:
        hi *= 2
    return optimize.brentq(lambda e: density_ratio(e) - u, lo, hi, xtol=1e-12, rtol=1e-14)


def eta_2d(n_sheet: float, N2d: float) -> float:
    """Exact reduced Fermi level for a single 2D subband."""
    return math.log(math.expm1(n_sheet / N2d))


def _eta_3d(n: float, N_eff: float) -> float:
    if n / N_eff <= JD_MAX_U:
        return joyce_dixon_eta(n, N_eff)
    return exact_eta(n, N_eff)


def renormalized_gap(material: MaterialParams, n: float, T: float, C_bgr: float | None = None) -> float:
    """Gap shrunk by C_bgr * (n / 1e18 cm^-3)^(1/3)."""
    if n < 0:
        raise DomainError("density must be non-negative")
    if C_bgr is None:
        C_bgr = frozen_calibration().C_bgr
    Eg = bandgap(material, T) - C_bgr * (n / 1e18) ** (1.0 / 3.0)
    if Eg <= 0:
        raise ValueError(f"renormalized gap {Eg:.4f} eV is not positive; check C_bgr")
    return Eg


@dataclass(frozen=True)
class CarrierState:
    n: float  # cm^-3
    p: float  # cm^-3
    T: float  # K
    eta_c: float
    eta_v: float
    Eg_eff: float  # eV
    gamma: float  # s^-1
    well_width: float | None = None  # Angstrom; None for bulk statistics
    C_bgr: float = 0.0  # eV, shrinkage coefficient used for Eg_eff

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError("dephasing rate must be positive")
        if self.Eg_eff <= 0:
            raise DomainError("effective gap must be positive")

    @property
    def kT(self) -> float:
        return KB_EV * self.T


def make_carrier_state(
    material: MaterialParams,
    n: float,
    T: float,
    gamma: float = DEFAULT_GAMMA,
    well_width: float | None = None,
    C_bgr: float | None = None,
) -> CarrierState:
    """Carrier state for an undoped active region (n = p).

    With ``well_width`` [Angstrom] the statistics are those of a single 2D
    subband holding the sheet density n * well_width.
    """
    if n <= 0:
        raise DomainError("density must be positive")
    if T <= 0:
        raise DomainError("temperature must be positive")
    if gamma <= 0:
        raise DomainError("dephasing rate must be positive (gamma = 0 diverges)")
    if well_width is None:
        eta_c = _eta_3d(n, effective_dos(material.m_e, T))
        eta_v = _eta_3d(n, effective_dos(material.m_hh, T))
    else:
        ns = n * well_width * 1e-8
        eta_c = eta_2d(ns, effective_dos_2d(material.m_e, T))
        eta_v = eta_2d(ns, effective_dos_2d(material.m_hh, T))
    if C_bgr is None:
        C_bgr = frozen_calibration().C_bgr
    Eg = renormalized_gap(material, n, T, C_bgr)
    return CarrierState(n, n, T, eta_c, eta_v, Eg, gamma, well_width, C_bgr)


def with_density(state: CarrierState, material: MaterialParams, n: float) -> CarrierState:
    """Same temperature, dephasing and calibration at a new density."""
    return make_carrier_state(material, n, state.T, state.gamma, state.well_width, state.C_bgr)


def occupation_factors(state: CarrierState, material: MaterialParams, k):
    """Electron occupations (f1 in the CB, f2 in the VB) at crystal momentum k [m^-1]."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    kT = state.kT * E_CHARGE
    Ee = HBAR**2 * k * k / (2 * material.m_e * M0)
    Eh = HBAR**2 * k * k / (2 * material.m_hh * M0)
    f1 = expit(state.eta_c - Ee / kT)
    f2 = 1.0 - expit(state.eta_v - Eh / kT)
    return f1, f2


def emission_weight(f1, f2):
    """Population weight of the two-photon transition.

    The valence factor is the availability of the VB target state (1 - f2,
    the hole occupation); the conduction factor is (1 - f1) as printed in
    the matrix element.  The weight vanishes when the bands are empty.
    """
    return (1.0 - f2) * (1.0 - f1)


def weight_from_excess(state: CarrierState, material: MaterialParams, x):
    """Emission weight as a function of pair excess energy x = E21 - gap [eV]."""
    x = np.asarray(x, dtype=float)
    mr = material.m_r
    h = expit(state.eta_v - x * (mr / material.m_hh) / state.kT)
    ce = expit(x * (mr / material.m_e) / state.kT - state.eta_c)  # 1 - f1
    return h * ce


def pump_to_density(P_pump: float, spot_diameter: float = 30.0, material: MaterialParams | None = None) -> float:
    """Calibrated pump-power to carrier-density map, cm^-3.

    A single constant fixed so 100 mW in a 30 um spot gives 1.2e18 cm^-3;
    not a transport model.
    """
    if P_pump < 0:
        raise DomainError("pump power must be non-negative")
    if P_pump > PUMP_MAX_W:
        warnings.warn(
            f"pump {P_pump * 1e3:.0f} mW beyond the {PUMP_MAX_W * 1e3:.0f} mW calibration range",
            stacklevel=2,
        )
    area = math.pi * (0.5 * spot_diameter * 1e-4) ** 2
    return PUMP_KAPPA * P_pump / area
