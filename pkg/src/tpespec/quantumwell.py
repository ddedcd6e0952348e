"""Finite square well ground states and the CB/VB envelope overlap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .constants import E_CHARGE, HBAR, M0, DomainError
from .materials import MaterialParams, QWLayerSpec, bandgap, lookup

N_SAMPLES = 4096
DECAY_LENGTHS = 5.0


class QWSolverError(RuntimeError):
    """Bound-state search failed."""


@dataclass(frozen=True)
class EnvelopeState:
    band: str
    energy_above_band_edge: float  # eV
    samples: np.ndarray
    grid_step: float  # Angstrom
    decay_length: float  # Angstrom

    @property
    def x(self) -> np.ndarray:
        n = self.samples.size
        return (np.arange(n) - (n - 1) / 2) * self.grid_step


def _wavenumbers(E, V, mw, mb):
    """Well and barrier wavenumbers in 1/Angstrom for energy E [eV]."""
    k = math.sqrt(2 * mw * M0 * E * E_CHARGE) / HBAR * 1e-10
    kappa = math.sqrt(2 * mb * M0 * max(V - E, 0.0) * E_CHARGE) / HBAR * 1e-10
    return k, kappa


def infinite_well_energy(width_A: float, mass: float) -> float:
    L = width_A * 1e-10
    return (HBAR * math.pi / L) ** 2 / (2 * mass * M0) / E_CHARGE


def ground_state_energy(well_width, barrier_offset, mass_well, mass_barrier) -> float:
    """Even-parity ground state from the BenDaniel-Duke matching condition.

    Solves (k/m_w) tan(kL/2) = kappa/m_b on the first tangent branch.
    """
    if min(well_width, mass_well, mass_barrier) <= 0:
        raise DomainError("width and masses must be positive")
    if barrier_offset <= 0:
        raise QWSolverError(f"barrier offset {barrier_offset} eV binds no state")
    half = 0.5 * well_width

    def g(E):
        k, kappa = _wavenumbers(E, barrier_offset, mass_well, mass_barrier)
        return (k / mass_well) * math.sin(k * half) - (kappa / mass_barrier) * math.cos(k * half)

    top = min(barrier_offset, infinite_well_energy(well_width, mass_well))
    lo, hi = top * 1e-14, top * (1 - 1e-14)
    glo, ghi = g(lo), g(hi)
    if not (glo < 0 < ghi):
        raise QWSolverError(
            f"no sign change on [{lo:.3e}, {hi:.6f}] eV: g={glo:.3e}, {ghi:.3e} "
            f"(L={well_width}, V={barrier_offset}, mw={mass_well}, mb={mass_barrier})"
        )
    return optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def ground_state(
    well_width: float,
    barrier_offset: float,
    mass_well: float,
    mass_barrier: float,
    band: str = "CB",
    half_span: float | None = None,
    n_samples: int = N_SAMPLES,
) -> EnvelopeState:
    """Normalized, sampled ground-state envelope of a symmetric finite well."""
    E = ground_state_energy(well_width, barrier_offset, mass_well, mass_barrier)
    k, kappa = _wavenumbers(E, barrier_offset, mass_well, mass_barrier)
    half = 0.5 * well_width
    if half_span is None:
        half_span = half + DECAY_LENGTHS / kappa
    x = np.linspace(-half_span, half_span, n_samples)
    dx = x[1] - x[0]
    inside = np.abs(x) <= half
    phi = np.where(
        inside,
        np.cos(k * x),
        math.cos(k * half) * np.exp(-kappa * (np.abs(x) - half)),
    )
    phi /= math.sqrt(np.sum(phi * phi) * dx)
    return EnvelopeState(band, E, phi, dx, 1.0 / kappa)


def envelope_overlap(phi_c: EnvelopeState, phi_v: EnvelopeState) -> float:
    """|<phi_c|phi_v>|^2 on a shared grid."""
    if phi_c.samples.shape != phi_v.samples.shape or not math.isclose(
        phi_c.grid_step, phi_v.grid_step, rel_tol=1e-12
    ):
        raise ValueError("envelopes are sampled on different grids")
    s = float(np.sum(phi_c.samples * phi_v.samples) * phi_c.grid_step)
    return min(s * s, 1.0)


@dataclass(frozen=True)
class QWStack:
    layers: QWLayerSpec
    well: MaterialParams
    barrier: MaterialParams
    S_qw: float  # cm^2 per well
    overlap_sq: float
    e0_c: float  # eV
    e0_v: float  # eV
    transition_gap: float  # eV, unrenormalized, at build temperature
    T: float

    def edge(self, Eg_eff_well: float) -> float:
        """Lowest pair energy for a given (renormalized) well gap."""
        return Eg_eff_well + self.layers.strain_shift + self.e0_c + self.e0_v


def build_stack(
    spec: QWLayerSpec, material_table=None, S_qw: float = 2e-5, T: float = 300.0
) -> QWStack:
    """Solve both ground states; periods act as independent identical wells."""
    well = lookup(spec.well_material, material_table)
    barrier = lookup(spec.barrier_material, material_table)
    L = spec.well_width
    # common grid for both bands
    spans = []
    for V, mw, mb in (
        (spec.conduction_band_offset, well.m_e, barrier.m_e),
        (spec.valence_band_offset, well.m_hh, barrier.m_hh),
    ):
        E = ground_state_energy(L, V, mw, mb)
        spans.append(1.0 / _wavenumbers(E, V, mw, mb)[1])
    half_span = 0.5 * L + DECAY_LENGTHS * max(spans)
    c = ground_state(L, spec.conduction_band_offset, well.m_e, barrier.m_e, "CB", half_span)
    v = ground_state(L, spec.valence_band_offset, well.m_hh, barrier.m_hh, "VB", half_span)
    gap = bandgap(well, T) + spec.strain_shift + c.energy_above_band_edge + v.energy_above_band_edge
    return QWStack(
        layers=spec,
        well=well,
        barrier=barrier,
        S_qw=S_qw,
        overlap_sq=envelope_overlap(c, v),
        e0_c=c.energy_above_band_edge,
        e0_v=v.energy_above_band_edge,
        transition_gap=gap,
        T=T,
    )


def paper_layer_spec(strain_shift: float = 0.0) -> QWLayerSpec:
    """4 x 50 A Ga0.45In0.55P wells with 55 A AlGaInP barriers."""
    return QWLayerSpec(
        well_width=50.0,
        barrier_width=55.0,
        well_material="GaInP-well",
        barrier_material="AlGaInP-barrier",
        conduction_band_offset=0.28,
        valence_band_offset=0.14,
        num_periods=4,
        strain_shift=strain_shift,
    )
