"""Spontaneous, stimulated and one-photon emission spectra.

Spectral values are photon emission rates per unit photon energy
[s^-1 eV^-1] after collection.  A two-photon event contributes at both of
its photon energies.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels as K
from .carriers import CarrierState, weight_from_excess, with_density
from .constants import C_LIGHT, E_CHARGE, EPS0, HBAR, HBAR_EVS, HC_EVNM, M0, DomainError
from .materials import MaterialParams, refractive_index_clamped
from .quantumwell import QWStack

QUAD_RTOL = 1e-6
WEIGHT_CUTOFF = 1e-8
MAX_PANELS = 4096

# Eq.-level rate is taken as already summed over photon directions and
# polarizations; set >1 to apply an extra per-photon angular sum.
TPE_ANGULAR_FACTOR = 1.0

BULK_GRID = (0.55, 1.15, 600)
QW_GRID = (0.7, 1.4, 600)


@dataclass(frozen=True)
class CollectionGeometry:
    solid_angle_fraction: float = 1.0
    optics_efficiency: float = 1.0
    volume_or_area: float | None = None  # bulk volume [cm^3]; QW sheet area lives on the stack

    def __post_init__(self):
        for name in ("solid_angle_fraction", "optics_efficiency"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.volume_or_area is not None and self.volume_or_area <= 0:
            raise ValueError("volume_or_area must be positive")

    @property
    def collection(self) -> float:
        return self.solid_angle_fraction * self.optics_efficiency


@dataclass(frozen=True)
class StimulationConfig:
    E_s: float  # eV
    P_s: float  # W
    mode_area: float  # um^2
    confinement: float = 1.0
    n_s: float | None = None  # index at E_s; None takes the material's

    def __post_init__(self):
        if self.E_s <= 0:
            raise DomainError("stimulating photon energy must be positive")
        if self.P_s < 0:
            raise DomainError("stimulating power must be non-negative")
        if self.mode_area <= 0:
            raise DomainError("mode area must be positive")
        if not (0 < self.confinement <= 1):
            raise DomainError("confinement must be in (0, 1]")


@dataclass
class Spectrum:
    grid: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ValueError("grid and values must be 1-D and of equal length")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def with_values(self, values, kind=None, **meta) -> "Spectrum":
        return Spectrum(self.grid.copy(), values, kind or self.kind, {**self.meta, **meta})


def make_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, int(n))


# ----------------------------------------------------------------- medium


@dataclass(frozen=True)
class _Medium:
    material: MaterialParams
    edge: float  # lowest pair energy, eV
    k_power: int
    size: float  # V [m^3] or pi |<c|v>|^2 S N [m^2]
    dos_2d: bool

    @property
    def index(self):
        m = self.material.n_model
        if m.kind == "constant":
            return (0, m.params[0], 0.0, 0.3, 2.5)
        return (1, m.params[0], m.params[1], 0.3, m.valid_max)

    def k_of_x(self, x):
        return np.sqrt(2 * self.material.m_r * M0 * np.asarray(x) * E_CHARGE) / HBAR

    def x_of_k(self, k):
        return (HBAR * np.asarray(k)) ** 2 / (2 * self.material.m_r * M0) / E_CHARGE


def _medium(state: CarrierState, system, geom: CollectionGeometry | None) -> _Medium:
    if isinstance(system, QWStack):
        if state.well_width is None:
            raise ValueError("QW spectra need a carrier state built with well_width")
        size = math.pi * system.overlap_sq * system.S_qw * 1e-4 * system.layers.num_periods
        return _Medium(system.well, system.edge(state.Eg_eff), 3, size, True)
    if geom is None or geom.volume_or_area is None:
        raise ValueError("bulk spectra need a CollectionGeometry with volume_or_area [cm^3]")
    return _Medium(system, state.Eg_eff, 4, geom.volume_or_area * 1e-6, False)


def tpe_prefactor(material: MaterialParams) -> float:
    """(e/m0)^4 p_cv^2 / (2 pi^5 eps0^2 c^6) (m0/m_r)^2, in m^2 (index factors excluded)."""
    return (
        (E_CHARGE / M0) ** 4
        * material.p_cv_sq
        / (2 * math.pi**5 * EPS0**2 * C_LIGHT**6)
        / material.m_r**2
    )


def _k_max(state: CarrierState, med: _Medium) -> float:
    """k where the occupation weight has dropped below WEIGHT_CUTOFF of its peak."""
    mat = med.material
    scale = state.kT / min(mat.m_r / mat.m_e, mat.m_r / mat.m_hh)
    top = scale * (60.0 + max(state.eta_c, state.eta_v, 0.0))
    x = np.linspace(0.0, top, 40001)
    w = weight_from_excess(state, mat, x)
    above = np.nonzero(w >= WEIGHT_CUTOFF * w.max())[0]
    if above.size == 0 or not np.isfinite(w.max()) or w.max() <= 0:
        return 0.0
    x_hi = x[min(above[-1] + 1, x.size - 1)]
    return float(med.k_of_x(x_hi))


def _k_weights(state: CarrierState, med: _Medium, k):
    w = weight_from_excess(state, med.material, med.x_of_k(k))
    return k**med.k_power * w


# ----------------------------------------------------------------- matrix element


def matrix_element_sq(E1, E21, k, state: CarrierState, material: MaterialParams):
    """Two-photon matrix element squared [m^2] for pair energy E21 at momentum k.

    ``k`` enters through the occupation factors; it should satisfy
    E21 = Eg_eff + hbar^2 k^2 / 2 m_r for the band pair being modelled.
    """
    E1 = np.asarray(E1, dtype=float)
    E21 = np.asarray(E21, dtype=float)
    if np.any(E1 <= 0) or np.any(E1 >= E21):
        raise DomainError("need 0 < E1 < E21 (complementary photon energy must be positive)")
    if state.gamma <= 0:
        raise DomainError("gamma must be positive")
    E2 = E21 - E1
    n1 = refractive_index_clamped(material, E1)
    n2 = refractive_index_clamped(material, E2)
    res = K.resonance_np(E1 / HBAR_EVS, E2 / HBAR_EVS, state.gamma)
    x = (HBAR * np.asarray(k, dtype=float)) ** 2 / (2 * material.m_r * M0) / E_CHARGE
    w = weight_from_excess(state, material, x)
    out = tpe_prefactor(material) * n1 * n2 * res * w
    return float(out) if out.ndim == 0 else out


def photon_dos(E, n):
    """omega^2 n^3 / ((2 pi)^3 c^3): photon states per unit angular frequency,
    volume and solid angle [s m^-3 sr^-1]."""
    if np.any(np.asarray(E) <= 0) or np.any(np.asarray(n) < 1):
        raise DomainError("need E > 0 and n >= 1")
    w = np.asarray(E, dtype=float) / HBAR_EVS
    out = w**2 * np.asarray(n, dtype=float) ** 3 / ((2 * math.pi) ** 3 * C_LIGHT**3)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------- TPE spectra


def _tpe_values(state, med, grid):
    kmax = _k_max(state, med)
    if kmax <= 0:
        return np.zeros_like(grid)
    scale = med.size * tpe_prefactor(med.material) / HBAR_EVS * TPE_ANGULAR_FACTOR
    panels, prev = 8, None
    while True:
        k, wq = K.composite_nodes(0.0, kmax, panels)
        pref = wq * _k_weights(state, med, k)
        S = K.spectrum_sum(grid, med.edge + med.x_of_k(k), pref, state.gamma, HBAR_EVS, med.index)
        if prev is not None:
            floor = 1e-12 * np.abs(S).max()
            if np.all(np.abs(S - prev) <= QUAD_RTOL * np.maximum(np.abs(S), floor)):
                break
        if panels >= MAX_PANELS:
            raise RuntimeError("k quadrature did not converge")
        prev, panels = S, panels * 2
    return scale * S


def _check_grid(grid, state, med):
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid >= med.edge + 10 * state.kT):
        raise DomainError("grid must lie inside (0, edge + 10 kT)")
    return grid


def _meta(kind, state, system, geom, **extra):
    m = {"kind": kind, "state": asdict(state)}
    if isinstance(system, QWStack):
        m["stack"] = {
            "well": system.well.name,
            "barrier": system.barrier.name,
            "layers": asdict(system.layers),
            "S_qw_cm2": system.S_qw,
            "overlap_sq": system.overlap_sq,
            "e0_c": system.e0_c,
            "e0_v": system.e0_v,
        }
        m["material"] = {"name": system.well.name, **system.well.to_block()}
    else:
        m["material"] = {"name": system.name, **system.to_block()}
    if geom is not None:
        m["geometry"] = asdict(geom)
    m.update(extra)
    return m


def spontaneous_bulk_spectrum(state, material, geom, grid=None) -> Spectrum:
    """Bulk spontaneous TPE: k-integral of k^4 V M^2 at every photon energy."""
    grid = make_grid(*BULK_GRID) if grid is None else grid
    med = _medium(state, material, geom)
    grid = _check_grid(grid, state, med)
    vals = _tpe_values(state, med, grid) * geom.collection
    return Spectrum(grid, vals, "spontaneous-TPE-bulk", _meta("spontaneous-TPE-bulk", state, material, geom))


def spontaneous_qw_spectrum(state, stack: QWStack, geom=None, grid=None) -> Spectrum:
    """QW spontaneous TPE: in-plane k-integral of k^3 pi |<c|v>|^2 S M^2, times periods."""
    geom = geom or CollectionGeometry()
    grid = make_grid(*QW_GRID) if grid is None else grid
    med = _medium(state, stack, geom)
    grid = _check_grid(grid, state, med)
    vals = _tpe_values(state, med, grid) * geom.collection
    return Spectrum(grid, vals, "spontaneous-TPE-qw", _meta("spontaneous-TPE-qw", state, stack, geom))


def spontaneous_spectrum(state, system, geom=None, grid=None) -> Spectrum:
    if isinstance(system, QWStack):
        return spontaneous_qw_spectrum(state, system, geom, grid)
    return spontaneous_bulk_spectrum(state, system, geom, grid)


# ----------------------------------------------------------------- pair-energy quantities


def _pair_nodes(state, med, panels=256):
    kmax = _k_max(state, med)
    k, wq = K.composite_nodes(0.0, kmax, panels)
    return k, wq, med.edge + med.x_of_k(k)


def pair_distribution(state, system, geom=None, E21=None):
    """Photon emission rate per unit pair energy, dR/dE21 [s^-1 eV^-1], emitted.

    Integrating over E21 gives the full-range photon rate (two per pair).
    """
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    if E21 is None:
        kmax = _k_max(state, med)
        E21 = med.edge + np.linspace(0, med.x_of_k(kmax), 4001)[1:]
    E21 = np.asarray(E21, dtype=float)
    x = E21 - med.edge
    ok = x > 0
    xs = np.where(ok, x, 1.0)
    k = med.k_of_x(xs)
    G = K.pair_integral(np.where(ok, E21, med.edge + 1.0), state.gamma, HBAR_EVS, med.index)
    dk_dE = med.material.m_r * M0 * E_CHARGE / (HBAR**2 * k)
    val = med.size * tpe_prefactor(med.material) * TPE_ANGULAR_FACTOR * _k_weights(state, med, k) * G * dk_dE
    return E21, np.where(ok, val, 0.0)


def degenerate_pair_density(state, system, E21):
    """Spontaneous spectral weight of pair energy E21 at its degenerate point E1 = E21/2.

    Proportional to k^p w(k) dk/dE21 n(E21/2)^2 R(E21/2, E21/2): the
    pair-energy distribution seen by photons in the central part of the
    spectrum, free of the dephasing-limited low-energy tail.
    """
    med = _medium(state, system, CollectionGeometry(volume_or_area=1e-12))
    E21 = np.asarray(E21, dtype=float)
    x = E21 - med.edge
    ok = x > 0
    k = med.k_of_x(np.where(ok, x, 1.0))
    half = 0.5 * np.where(ok, E21, 1.0)
    n = refractive_index_clamped(med.material, half)
    res = K.resonance_np(half / HBAR_EVS, half / HBAR_EVS, state.gamma)
    dk_dE = med.material.m_r * M0 * E_CHARGE / (HBAR**2 * k)
    return np.where(ok, _k_weights(state, med, k) * dk_dE * n * n * res, 0.0)


def tpe_center(state, system, geom=None) -> float:
    """Centre of the spontaneous TPE spectrum: half the most probable pair energy.

    Every pair energy yields a spectrum symmetric about E21/2; the most
    probable pair fixes the point about which stimulated photons pair up.
    """
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    top = med.x_of_k(_k_max(state, med))
    E21 = med.edge + np.linspace(0.0, top, 8001)[1:]
    D = degenerate_pair_density(state, system, E21)
    i = int(np.argmax(D))
    lo, hi = E21[max(i - 2, 0)], E21[min(i + 2, E21.size - 1)]
    res = optimize.minimize_scalar(
        lambda e: -degenerate_pair_density(state, system, [e])[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8},
    )
    return 0.5 * float(res.x)


def tpe_total_rates(state, system, geom=None):
    """(photon rate [s^-1], power [W]) of spontaneous TPE over all photon energies, emitted."""
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    k, wq, E21 = _pair_nodes(state, med)
    G = K.pair_integral(E21, state.gamma, HBAR_EVS, med.index)
    base = med.size * tpe_prefactor(med.material) * TPE_ANGULAR_FACTOR * wq * _k_weights(state, med, k) * G
    rate = float(np.sum(base))
    power = float(np.sum(base * 0.5 * E21)) * E_CHARGE
    return rate, power


# ----------------------------------------------------------------- one-photon


def _einstein_a(material, E):
    """Spontaneous emission rate [s^-1] of one transition with |p|^2 = (m0/2) E_p."""
    w = np.asarray(E) / HBAR_EVS
    n = refractive_index_clamped(material, E)
    return w * n * E_CHARGE**2 * material.p_cv_sq / (3 * math.pi * EPS0 * HBAR * M0**2 * C_LIGHT**3)


def _one_photon_density(state, med, E):
    """Emitted one-photon rate per eV at photon energy E."""
    E = np.asarray(E, dtype=float)
    x = E - med.edge
    ok = x > 0
    xs = np.where(ok, x, 0.0)
    mr = med.material.m_r * M0
    if med.dos_2d:
        rho = np.full_like(xs, mr / (math.pi * HBAR**2) * E_CHARGE)  # m^-2 eV^-1
        size = med.size / math.pi  # |<c|v>|^2 S N
    else:
        rho = (2 * mr / HBAR**2) ** 1.5 * np.sqrt(xs * E_CHARGE) / (2 * math.pi**2) * E_CHARGE
        size = med.size
    val = size * _einstein_a(med.material, E) * rho * weight_from_excess(state, med.material, xs)
    return np.where(ok, val, 0.0)


def one_photon_spectrum(state, system, geom=None, grid=None) -> Spectrum:
    """First-order spontaneous emission with a k-independent p_cv and the same occupation weight."""
    geom = geom or CollectionGeometry()
    if grid is None:
        grid = make_grid(1.7, 2.3, 600) if isinstance(system, QWStack) else make_grid(1.2, 1.9, 700)
    med = _medium(state, system, geom)
    vals = _one_photon_density(state, med, grid) * geom.collection
    return Spectrum(grid, vals, "one-photon", _meta("one-photon", state, system, geom))


def one_photon_total_rates(state, system, geom=None):
    """(photon rate [s^-1], power [W]) of one-photon emission, emitted."""
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    kmax = _k_max(state, med)
    k, wq = K.composite_nodes(0.0, kmax, 256)
    E = med.edge + med.x_of_k(k)
    # states per unit k: 2 spins x (4 pi k^2 / (2 pi)^3) or (2 pi k / (2 pi)^2)
    if med.dos_2d:
        dens = k / math.pi
        size = med.size / math.pi
    else:
        dens = k * k / math.pi**2
        size = med.size
    r = size * wq * dens * _einstein_a(med.material, E) * weight_from_excess(state, med.material, med.x_of_k(k))
    return float(np.sum(r)), float(np.sum(r * E)) * E_CHARGE


# ----------------------------------------------------------------- stimulation


def stimulating_flux_factor(stim: StimulationConfig, n_s: float) -> float:
    """Beam photon density over photon mode density, times confinement [s^-1].

    Multiplying the spontaneous dW/domega_1 at omega_s by this factor gives
    the stimulated pair rate.
    """
    w = stim.E_s / HBAR_EVS
    A = stim.mode_area * 1e-12
    return stim.confinement * stim.P_s * math.pi**2 * C_LIGHT**2 / (HBAR * w**3 * n_s**2 * A)


def _stim_index(stim, material):
    return stim.n_s if stim.n_s is not None else float(refractive_index_clamped(material, stim.E_s))


def complementary_density(state, system, stim, geom=None, E_c=None):
    """Emitted rate of complementary photons per eV at energies E_c."""
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    E_c = np.asarray(E_c, dtype=float)
    E21 = stim.E_s + E_c
    x = E21 - med.edge
    ok = (x > 0) & (E_c > 0)
    xs = np.where(ok, x, 1.0)
    k = med.k_of_x(xs)
    n_s = _stim_index(stim, med.material)
    n_c = refractive_index_clamped(med.material, np.where(ok, E_c, 1.0))
    res = K.resonance_np(stim.E_s / HBAR_EVS, np.where(ok, E_c, 1.0) / HBAR_EVS, state.gamma)
    dk_dE = med.material.m_r * M0 * E_CHARGE / (HBAR**2 * k)
    d2W = (
        med.size * tpe_prefactor(med.material) * TPE_ANGULAR_FACTOR
        * _k_weights(state, med, k) * n_s * n_c * res * dk_dE
    )
    val = stimulating_flux_factor(stim, n_s) * d2W
    return np.where(ok, val, 0.0)


def stimulated_pair_rate(state, system, stim, geom=None) -> float:
    """Total stimulated pair rate [s^-1], emitted."""
    med = _medium(state, system, geom or CollectionGeometry(volume_or_area=1e-12))
    kmax = _k_max(state, med)
    k, wq = K.composite_nodes(0.0, kmax, 256)
    E_c = med.edge + med.x_of_k(k) - stim.E_s
    ok = E_c > 0
    # change of variables E_c -> k: dE_c = dk / (dk/dE21)
    dens = complementary_density(state, system, stim, geom, np.where(ok, E_c, -1.0))
    dE_dk = HBAR**2 * k / (med.material.m_r * M0 * E_CHARGE)
    return float(np.sum(wq * dens * dE_dk))


def stimulated_component(state, system, stim, geom=None, grid=None) -> np.ndarray:
    """Collected stimulated contribution on a grid: complementary band plus the E_s line."""
    geom = geom or CollectionGeometry()
    grid = np.asarray(grid, dtype=float)
    comp = complementary_density(state, system, stim, geom, grid)
    line = np.zeros_like(grid)
    if stim.P_s > 0 and grid[0] <= stim.E_s <= grid[-1]:
        total = stimulated_pair_rate(state, system, stim, geom)
        # deposit the line area into the two neighbouring bins
        dE = grid[1] - grid[0]
        j = min(int((stim.E_s - grid[0]) / dE), grid.size - 2)
        t = (stim.E_s - grid[j]) / dE
        line[j] += (1 - t) * total / dE
        line[j + 1] += t * total / dE
    return (comp + line) * geom.collection


def stimulated_spectrum(state, system, stim: StimulationConfig, geom=None, grid=None,
                        carrier_budget: bool = False) -> Spectrum:
    """Spontaneous background plus singly-stimulated emission.

    With ``carrier_budget`` the density is first lowered to balance the
    extra recombination channel at the unstimulated generation rate.
    """
    is_qw = isinstance(system, QWStack)
    grid = make_grid(*(QW_GRID if is_qw else BULK_GRID)) if grid is None else np.asarray(grid, float)
    if not (0 < stim.E_s < grid[-1]):
        raise DomainError("stimulating energy must lie inside (0, max grid)")
    used = state
    if carrier_budget and stim.P_s > 0:
        pump = total_recombination(state, system, None, geom)
        used = steady_state_balance(pump, state, stim, system, geom)
    spont = spontaneous_spectrum(used, system, geom, grid)
    vals = spont.values + (stimulated_component(used, system, stim, geom, grid) if stim.P_s > 0 else 0.0)
    meta = _meta("stimulated-TPE", used, system, geom, stimulation=asdict(stim), carrier_budget=carrier_budget)
    return Spectrum(grid, vals, "stimulated-TPE", meta)


def total_recombination(state, system, stim=None, geom=None) -> float:
    """Carrier recombination rate [s^-1]: one-photon + TPE pairs + stimulated pairs."""
    r1, _ = one_photon_total_rates(state, system, geom)
    r2, _ = tpe_total_rates(state, system, geom)
    r = r1 + 0.5 * r2
    if stim is not None and stim.P_s > 0:
        r += stimulated_pair_rate(state, system, stim, geom)
    return r


def steady_state_balance(pump_rate, state, stim, system, geom=None) -> CarrierState:
    """Density at which recombination (including stimulation) equals ``pump_rate``."""
    if pump_rate <= 0:
        raise DomainError("pump rate must be positive")
    mat = system.well if isinstance(system, QWStack) else system

    def excess(n):
        return total_recombination(with_density(state, mat, n), system, stim, geom) / pump_rate - 1.0

    lo, hi = state.n * 1e-3, state.n * 10
    flo, fhi = excess(lo), excess(hi)
    if not (flo < 0 < fhi):
        raise ValueError(f"no steady state in [{lo:.3g}, {hi:.3g}] cm^-3")
    f0 = excess(state.n)
    if f0 == 0.0:
        return state
    if f0 > 0:
        hi = state.n
    else:
        lo = state.n
    n = optimize.brentq(excess, lo, hi, xtol=state.n * 1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return with_density(state, mat, n)


# ----------------------------------------------------------------- post-processing


def total_power(spec: Spectrum, photons_per_event: int = 2) -> float:
    """Power [W] in the spectrum window: trapezoid of rate density times photon energy.

    Both photons of a pair already appear in a TPE spectrum, so the
    integral is taken once whatever ``photons_per_event`` is.
    """
    if photons_per_event not in (1, 2):
        raise ValueError("photons_per_event must be 1 or 2")
    return float(np.trapezoid(spec.values * spec.grid, spec.grid)) * E_CHARGE


def instrument_fwhm(E, resolution_nm):
    """Energy FWHM of a wavelength-domain Gaussian of FWHM resolution_nm."""
    E = np.asarray(E, dtype=float)
    return E * E * resolution_nm / HC_EVNM


def convolve_instrument(spec: Spectrum, resolution_nm: float) -> Spectrum:
    """Gaussian instrument broadening with an energy-dependent width.

    Each input bin is spread with its own kernel normalized on the grid, so
    the integrated area is preserved.
    """
    if resolution_nm <= 0:
        raise DomainError("resolution must be positive")
    E = spec.grid
    fwhm = instrument_fwhm(E, resolution_nm)
    span = E[-1] - E[0]
    if fwhm[E.size // 2] > span:
        raise DomainError("instrument width exceeds the grid span")
    sigma = fwhm / (2 * math.sqrt(2 * math.log(2)))
    dE = spec.step
    out = np.zeros_like(spec.values)
    tiny = sigma < 1e-3 * dE
    out[tiny] += spec.values[tiny]
    idx = np.nonzero(~tiny)[0]
    for j in idx:
        reach = int(math.ceil(8 * sigma[j] / dE)) + 1
        a, b = max(0, j - reach), min(E.size, j + reach + 1)
        ker = np.exp(-0.5 * ((E[a:b] - E[j]) / sigma[j]) ** 2)
        ker /= ker.sum()
        out[a:b] += spec.values[j] * ker
    return spec.with_values(out, resolution_nm=resolution_nm)


def find_peaks(spec: Spectrum, merge_width: float | None = None, min_prominence: float = 0.0):
    """Interior local maxima as (energy, height), highest first.

    Positions are refined by a parabola through the three top samples.
    Maxima closer than ``merge_width`` [eV] (default: the instrument FWHM
    recorded in the spectrum, else two grid steps) are reported as one, and
    after convolution maxima within one instrument width of the grid ends
    are dropped.
    ``min_prominence`` drops maxima whose prominence is below that fraction
    of the tallest peak.
    """
    from scipy.signal import find_peaks as _sp_find_peaks, peak_prominences

    v = spec.values
    idx, _ = _sp_find_peaks(v)
    if idx.size == 0:
        return []
    if min_prominence > 0:
        prom = peak_prominences(v, idx)[0]
        idx = idx[prom >= min_prominence * v[idx].max()]
    peaks = []
    for i in idx:
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        peaks.append((float(spec.grid[i] + off * spec.step), float(y1)))
    peaks.sort(key=lambda p: -p[1])
    res = spec.meta.get("resolution_nm")
    lo, hi = spec.grid[0], spec.grid[-1]
    kept = []
    for e, h in peaks:
        inst = float(instrument_fwhm(e, res)) if res else 2 * spec.step
        # a truncated kernel piles area up within one width of the grid ends
        if res and min(e - lo, hi - e) < inst:
            continue
        w = inst if merge_width is None else merge_width
        if all(abs(e - e2) >= w for e2, _ in kept):
            kept.append((e, h))
    return kept
