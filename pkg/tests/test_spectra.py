import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import matrix_element_oracle, photon_dos_oracle, resonance_complex
from tpespec import _kernels as K
from tpespec import spectra as S
from tpespec.calibration_data import frozen_calibration
from tpespec.carriers import make_carrier_state
from tpespec.constants import E_CHARGE, HBAR, HBAR_EVS, HC_EVNM, M0, DomainError
from tpespec.materials import lookup, refractive_index
from tpespec.quantumwell import build_stack, paper_layer_spec

GAAS = lookup("GaAs")
BULK_GEOM = S.CollectionGeometry(0.02, 0.1, math.pi * (15e-4) ** 2 * 1e-4)
QW_GEOM = S.CollectionGeometry(0.3, 0.5)
BULK_GRID = np.linspace(0.55, 1.15, 601)
QW_GRID = np.linspace(0.7, 1.4, 701)


@pytest.fixture(scope="module")
def bulk():
    return make_carrier_state(GAAS, 1.2e18, 330.0)


@pytest.fixture(scope="module")
def stack():
    return build_stack(paper_layer_spec(frozen_calibration().qw_strain_shift))


@pytest.fixture(scope="module")
def qw(stack):
    return make_carrier_state(stack.well, 2e18, 300.0, well_width=50.0)


def k_for_pair(state, E21, material=GAAS):
    return math.sqrt(2 * material.m_r * M0 * (E21 - state.Eg_eff) * E_CHARGE) / HBAR


# ------------------------------------------------------------------ photon density of states


def test_photon_dos_scaling():
    assert S.photon_dos(1.0, 3.4) / S.photon_dos(0.5, 3.4) == pytest.approx(4.0, rel=1e-14)
    assert S.photon_dos(0.8, 6.8) / S.photon_dos(0.8, 3.4) == pytest.approx(8.0, rel=1e-14)


def test_photon_dos_absolute():
    assert S.photon_dos(0.81, 3.37) == pytest.approx(photon_dos_oracle(0.81, 3.37), rel=1e-12)


def test_photon_dos_domain():
    with pytest.raises(DomainError):
        S.photon_dos(0.0, 3.4)
    with pytest.raises(DomainError):
        S.photon_dos(1.0, 0.5)


# ------------------------------------------------------------------ matrix element


def test_matrix_element_degenerate_point(bulk):
    E21 = bulk.Eg_eff + 0.05
    k = k_for_pair(bulk, E21)
    n = refractive_index(GAAS, E21 / 2)
    got = S.matrix_element_sq(E21 / 2, E21, k, bulk, GAAS)
    ref = matrix_element_oracle(E21 / 2, E21, k, n, n, bulk.gamma, GAAS.m_e, GAAS.m_hh, GAAS.E_p,
                                bulk.eta_c, bulk.eta_v, bulk.T)
    assert got > 0 and math.isfinite(got)
    assert got == pytest.approx(ref, rel=1e-9)


@given(st.floats(0.01, 0.99), st.floats(0.001, 0.3))
def test_matrix_element_exchange_symmetry(frac, x):
    s = make_carrier_state(GAAS, 1.2e18, 330.0)
    E21 = s.Eg_eff + x
    k = k_for_pair(s, E21)
    a = S.matrix_element_sq(frac * E21, E21, k, s, GAAS)
    b = S.matrix_element_sq(E21 - frac * E21, E21, k, s, GAAS)
    assert a == pytest.approx(b, rel=1e-12)


@given(st.floats(0.02, 1.2), st.floats(0.02, 1.2), st.floats(1e11, 1e14))
def test_resonance_kernel_against_complex_arithmetic(E1, E2, gamma):
    got = K.resonance_np(E1 / HBAR_EVS, E2 / HBAR_EVS, gamma)
    assert got == pytest.approx(resonance_complex(E1, E2, gamma), rel=1e-10)


def test_infrared_growth():
    s = make_carrier_state(GAAS, 1.2e18, 330.0, gamma=1e9)
    E21 = s.Eg_eff + 0.05
    k = k_for_pair(s, E21)
    E1 = np.array([2e-3, 4e-3, 8e-3])
    w1, w2 = E1 / HBAR_EVS, (E21 - E1) / HBAR_EVS
    # the squared resonance sum grows as 1 / omega1^2 ...
    sq = K.resonance_np(w1, w2, s.gamma) / (w1 * w2)
    np.testing.assert_allclose(sq[:-1] / sq[1:], 4.0, rtol=0.02)
    # ... so the element, carrying omega1 omega2, grows as 1 / omega1 (indices clamped alike)
    M = S.matrix_element_sq(E1, E21, k, s, GAAS)
    np.testing.assert_allclose(M[:-1] / M[1:], 2.0, rtol=0.02)


@pytest.mark.parametrize("E1", [0.0, -0.1, 1.6])
def test_matrix_element_domain(bulk, E1):
    with pytest.raises(DomainError):
        S.matrix_element_sq(E1, 1.5, 1e8, bulk, GAAS)


def test_single_pair_spectrum_symmetric():
    # freeze k: one pair energy, unit weight
    E21 = 1.5
    grid = np.linspace(0.05, 1.45, 281)
    v = K.spectrum_sum(grid, np.array([E21]), np.array([1.0]), 1e13, HBAR_EVS, (0, 3.4, 0.0, 0.3, 2.5))
    np.testing.assert_allclose(v, v[::-1], rtol=1e-12)


# ------------------------------------------------------------------ spontaneous spectra


@given(st.floats(1e16, 5e18), st.floats(250.0, 400.0), st.floats(1e12, 1e14))
def test_bulk_spectrum_positive(n, T, gamma):
    s = make_carrier_state(GAAS, n, T, gamma)
    v = S.spontaneous_bulk_spectrum(s, GAAS, BULK_GEOM, np.linspace(0.3, 1.1, 81)).values
    assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_qw_spectrum_positive(qw, stack):
    v = S.spontaneous_qw_spectrum(qw, stack, QW_GEOM, QW_GRID).values
    assert np.all(np.isfinite(v)) and np.all(v > 0)


def test_bulk_spectrum_vanishes_with_density():
    hi = S.spontaneous_bulk_spectrum(make_carrier_state(GAAS, 1e18, 330.0), GAAS, BULK_GEOM, BULK_GRID)
    lo = S.spontaneous_bulk_spectrum(make_carrier_state(GAAS, 1e6, 330.0), GAAS, BULK_GEOM, BULK_GRID)
    assert lo.values.max() < 1e-10 * hi.values.max()


@pytest.mark.parametrize("n, target", [(1.2e18, 0.81), (2e18, 0.84)])
def test_bulk_center(n, target):
    s = make_carrier_state(GAAS, n, 330.0)
    assert S.tpe_center(s, GAAS, BULK_GEOM) == pytest.approx(target, abs=0.03)


@pytest.mark.parametrize("n, target", [(1.2e18, 0.81), (2e18, 0.84)])
def test_bulk_spectrum_maximum(n, target):
    # the maximum of the convolved spectrum itself, not the pair-energy centre
    s = make_carrier_state(GAAS, n, 330.0)
    spec = S.convolve_instrument(S.spontaneous_bulk_spectrum(s, GAAS, BULK_GEOM, BULK_GRID), 10.0)
    assert BULK_GRID[np.argmax(spec.values)] == pytest.approx(target, abs=0.03)


def test_qw_center(qw, stack):
    assert S.tpe_center(qw, stack, QW_GEOM) == pytest.approx(0.98, abs=0.03)


def test_zero_overlap_gives_zero(qw, stack):
    dark = dataclasses.replace(stack, overlap_sq=0.0)
    assert np.all(S.spontaneous_qw_spectrum(qw, dark, QW_GEOM, QW_GRID).values == 0.0)


def test_qw_linear_in_area_and_periods(qw, stack):
    base = S.spontaneous_qw_spectrum(qw, stack, QW_GEOM, QW_GRID).values
    twice_area = S.spontaneous_qw_spectrum(qw, dataclasses.replace(stack, S_qw=2 * stack.S_qw), QW_GEOM, QW_GRID)
    np.testing.assert_array_equal(twice_area.values, 2 * base)
    one = dataclasses.replace(stack, layers=dataclasses.replace(stack.layers, num_periods=1))
    two = dataclasses.replace(stack, layers=dataclasses.replace(stack.layers, num_periods=2))
    np.testing.assert_array_equal(
        S.spontaneous_qw_spectrum(qw, two, QW_GEOM, QW_GRID).values,
        2 * S.spontaneous_qw_spectrum(qw, one, QW_GEOM, QW_GRID).values,
    )


def test_gamma_regularity_and_edge_growth():
    grid = np.linspace(0.02, 1.3, 200)
    edges = []
    for gamma in (1e13, 5e12, 2.5e12, 1.25e12):
        s = make_carrier_state(GAAS, 1.2e18, 330.0, gamma=gamma)
        v = S.spontaneous_bulk_spectrum(s, GAAS, BULK_GEOM, grid).values
        assert np.all(np.isfinite(v))
        edges.append((v[0], v[-1]))
    lo, hi = np.array(edges).T
    assert np.all(np.diff(lo) >= 0) and np.all(np.diff(hi) >= 0)


def test_grid_outside_domain(bulk):
    with pytest.raises(DomainError):
        S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, np.linspace(0.0, 1.0, 11))
    with pytest.raises(DomainError):
        S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, np.linspace(0.5, 2.0, 11))


def test_deterministic(bulk):
    a = S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, BULK_GRID)
    b = S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, BULK_GRID)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.meta == b.meta


def test_spectrum_grid_invariants():
    with pytest.raises(ValueError):
        S.Spectrum(np.array([0.1, 0.3, 0.2]), np.zeros(3), "x")
    with pytest.raises(ValueError):
        S.Spectrum(np.array([0.1, 0.2]), np.zeros(3), "x")


# ------------------------------------------------------------------ one-photon


def test_one_photon_zero_below_edge(bulk):
    E = np.linspace(1.0, bulk.Eg_eff, 50)
    assert np.all(S.one_photon_spectrum(bulk, GAAS, BULK_GEOM, E).values == 0.0)


def test_qw_one_photon_peak(qw, stack):
    E = np.linspace(1.7, 2.3, 1201)
    spec = S.one_photon_spectrum(qw, stack, QW_GEOM, E)
    assert E[np.argmax(spec.values)] == pytest.approx(1.96, abs=0.06)


def test_gaas_cap_one_photon_peak():
    # undoped cap, light injection, room temperature
    s = make_carrier_state(GAAS, 1e17, 300.0)
    E = np.linspace(1.3, 1.8, 1001)
    spec = S.one_photon_spectrum(s, GAAS, BULK_GEOM, E)
    assert E[np.argmax(spec.values)] == pytest.approx(1.4, abs=0.06)


def test_one_photon_rate_matches_spectrum(bulk):
    # the hole factor decays over kT m_hh / m_r ~ 0.18 eV, so run well past it
    E = np.linspace(bulk.Eg_eff, bulk.Eg_eff + 5.0, 50001)
    spec = S.one_photon_spectrum(bulk, GAAS, S.CollectionGeometry(volume_or_area=1e-9), E)
    rate, _ = S.one_photon_total_rates(bulk, GAAS, S.CollectionGeometry(volume_or_area=1e-9))
    assert np.trapezoid(spec.values, E) == pytest.approx(rate, rel=1e-3)


# ------------------------------------------------------------------ stimulation


def test_zero_power_equals_spontaneous(bulk):
    stim = S.StimulationConfig(0.761, 0.0, 50.0)
    a = S.stimulated_spectrum(bulk, GAAS, stim, BULK_GEOM, BULK_GRID)
    b = S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, BULK_GRID)
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("bad", [dict(E_s=0.0), dict(P_s=-1e-3), dict(mode_area=0.0), dict(confinement=1.5)])
def test_stimulation_preconditions(bad):
    args = dict(E_s=0.8, P_s=1e-3, mode_area=50.0) | bad
    with pytest.raises(DomainError):
        S.StimulationConfig(**args)


def test_stimulating_energy_inside_grid(bulk):
    with pytest.raises(DomainError):
        S.stimulated_spectrum(bulk, GAAS, S.StimulationConfig(1.3, 1e-3, 50.0), BULK_GEOM, BULK_GRID)


def complementary_peak(state, system, geom, grid, E_s, res, P_s=2e-4, mode_area=50.0):
    stim = S.StimulationConfig(E_s, P_s, mode_area)
    comp = S.stimulated_component(state, system, stim, geom, grid)
    spec = S.convolve_instrument(S.Spectrum(grid, comp, "induced"), res)
    lw = float(S.instrument_fwhm(E_s, res))
    peaks = [p for p in S.find_peaks(spec) if abs(p[0] - E_s) > 2 * lw]
    return peaks[0][0], S.find_peaks(spec)


@pytest.mark.parametrize("n, E_s", [(1.2e18, 0.761), (1.2e18, 0.775), (1.2e18, 0.80), (1.2e18, 0.85),
                                    (1.2e18, 0.87), (2e18, 0.946)])
def test_bulk_pair_sum_conservation(n, E_s):
    s = make_carrier_state(GAAS, n, 330.0)
    E_c, _ = complementary_peak(s, GAAS, BULK_GEOM, BULK_GRID, E_s, 10.0)
    assert abs(E_s + E_c - 2 * S.tpe_center(s, GAAS, BULK_GEOM)) < 0.006


def test_bulk_1310nm_complementary_peak():
    s = make_carrier_state(GAAS, 2e18, 330.0)
    E_c, _ = complementary_peak(s, GAAS, BULK_GEOM, BULK_GRID, 0.946, 10.0)
    assert E_c == pytest.approx(0.733, abs=0.006)


def test_detuned_stimulation_two_peaks(bulk):
    center = S.tpe_center(bulk, GAAS, BULK_GEOM)
    _, peaks = complementary_peak(bulk, GAAS, BULK_GEOM, BULK_GRID, center - 0.049, 10.0)
    assert len(peaks) == 2


@pytest.mark.parametrize("E_s", [0.826, 0.855])
def test_qw_pair_sum_conservation(qw, stack, E_s):
    E_c, _ = complementary_peak(qw, stack, QW_GEOM, QW_GRID, E_s, 5.0, P_s=1e-3, mode_area=5.0)
    assert abs(E_s + E_c - 2 * S.tpe_center(qw, stack, QW_GEOM)) < 0.008


def test_stimulated_linear_in_power(qw, stack):
    P = np.linspace(5e-5, 2e-3, 6)
    heights = []
    for p in P:
        stim = S.StimulationConfig(0.826, float(p), 5.0)
        heights.append(S.complementary_density(qw, stack, stim, QW_GEOM, np.array([1.13]))[0])
    slope, icpt = np.polyfit(P, heights, 1)
    r2 = 1 - np.sum((heights - (slope * P + icpt)) ** 2) / np.sum((heights - np.mean(heights)) ** 2)
    assert r2 > 0.999999


def test_steady_state_fixed_point(bulk):
    pump = S.total_recombination(bulk, GAAS, None, BULK_GEOM)
    off = S.steady_state_balance(pump, bulk, S.StimulationConfig(0.761, 0.0, 50.0), GAAS, BULK_GEOM)
    assert off.n == pytest.approx(bulk.n, rel=1e-9)


def test_steady_state_depletion(bulk):
    pump = S.total_recombination(bulk, GAAS, None, BULK_GEOM)
    stim = S.StimulationConfig(0.761, 50e-3, 1.0)
    on = S.steady_state_balance(pump, bulk, stim, GAAS, BULK_GEOM)
    assert on.n < bulk.n
    a = S.stimulated_spectrum(bulk, GAAS, stim, BULK_GEOM, BULK_GRID, carrier_budget=False)
    b = S.stimulated_spectrum(bulk, GAAS, stim, BULK_GEOM, BULK_GRID, carrier_budget=True)
    far = np.abs(BULK_GRID - 1.1) < 0.02  # away from both E_s and E_c
    assert np.all(b.values[far] < a.values[far])


def test_steady_state_needs_positive_pump(bulk):
    with pytest.raises(DomainError):
        S.steady_state_balance(0.0, bulk, S.StimulationConfig(0.761, 1e-3, 50.0), GAAS, BULK_GEOM)


# ------------------------------------------------------------------ power


def test_total_power_of_zero_spectrum():
    assert S.total_power(S.Spectrum(BULK_GRID, np.zeros_like(BULK_GRID), "x")) == 0.0
    with pytest.raises(ValueError):
        S.total_power(S.Spectrum(BULK_GRID, np.zeros_like(BULK_GRID), "x"), 3)


def test_qw_power_ratio(qw, stack):
    _, p2 = S.tpe_total_rates(qw, stack, QW_GEOM)
    _, p1 = S.one_photon_total_rates(qw, stack, QW_GEOM)
    assert 1e-6 <= p2 / p1 <= 1e-4


def test_bulk_collected_power(bulk):
    _, p = S.tpe_total_rates(bulk, GAAS, BULK_GEOM)
    window = S.total_power(S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, BULK_GRID))
    for w in (p * BULK_GEOM.collection, window):
        assert 0.3e-9 <= w <= 30e-9


def test_pair_rate_integrates_spectrum(bulk):
    # the pair distribution and the photon spectrum count the same photons
    E21, d = S.pair_distribution(bulk, GAAS, BULK_GEOM)
    rate, _ = S.tpe_total_rates(bulk, GAAS, BULK_GEOM)
    assert np.trapezoid(d, E21) == pytest.approx(rate, rel=1e-3)


# ------------------------------------------------------------------ instrument and peaks


def fwhm_of(grid, v):
    half = v.max() / 2
    above = np.nonzero(v >= half)[0]
    i, j = above[0], above[-1]
    left = np.interp(half, [v[i - 1], v[i]], [grid[i - 1], grid[i]])
    right = np.interp(half, [v[j + 1], v[j]], [grid[j + 1], grid[j]])
    return right - left


def test_delta_line_broadening():
    E0 = HC_EVNM / 1530.0
    grid = np.linspace(E0 - 0.03, E0 + 0.03, 6001)
    vals = np.zeros_like(grid)
    vals[3000] = 1.0
    out = S.convolve_instrument(S.Spectrum(grid, vals, "line"), 10.0)
    expect = HC_EVNM * 10.0 / 1530.0**2
    assert expect == pytest.approx(5.3e-3, abs=0.05e-3)
    assert fwhm_of(grid, out.values) == pytest.approx(expect, rel=0.01)


@given(st.lists(st.floats(0.0, 1e6), min_size=40, max_size=40), st.floats(1.0, 30.0))
def test_convolution_preserves_area(vals, res):
    grid = np.linspace(0.6, 1.2, 400)
    v = np.interp(grid, np.linspace(0.6, 1.2, 40), vals)
    spec = S.Spectrum(grid, v, "x")
    a = np.sum(v)
    b = np.sum(S.convolve_instrument(spec, res).values)
    assert b == pytest.approx(a, rel=1e-6, abs=1e-300)


def test_vanishing_resolution_is_identity(bulk):
    spec = S.spontaneous_bulk_spectrum(bulk, GAAS, BULK_GEOM, BULK_GRID)
    np.testing.assert_array_equal(S.convolve_instrument(spec, 1e-9).values, spec.values)
    with pytest.raises(DomainError):
        S.convolve_instrument(spec, 0.0)


def test_single_lobe_one_peak():
    grid = np.linspace(0.5, 1.2, 701)
    spec = S.Spectrum(grid, np.exp(-0.5 * ((grid - 0.83) / 0.05) ** 2), "x")
    peaks = S.find_peaks(spec)
    assert len(peaks) == 1 and peaks[0][0] == pytest.approx(0.83, abs=1e-4)


def test_merge_width():
    grid = np.linspace(0.5, 1.2, 701)
    v = np.exp(-0.5 * ((grid - 0.80) / 0.004) ** 2) + 0.8 * np.exp(-0.5 * ((grid - 0.83) / 0.004) ** 2)
    spec = S.Spectrum(grid, v, "x")
    assert len(S.find_peaks(spec)) == 2
    assert len(S.find_peaks(spec, merge_width=0.05)) == 1
    assert S.find_peaks(spec)[0][0] == pytest.approx(0.80, abs=1e-3)
