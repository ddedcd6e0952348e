import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import shooting_ground_state
from tpespec.calibration_data import frozen_calibration
from tpespec.materials import lookup
from tpespec.quantumwell import (
    EnvelopeState,
    QWSolverError,
    build_stack,
    envelope_overlap,
    ground_state,
    ground_state_energy,
    infinite_well_energy,
    paper_layer_spec,
)


def random_wells(n=20, seed=2024):
    rng = np.random.default_rng(seed)
    return [
        (rng.uniform(20, 150), rng.uniform(0.05, 0.6), rng.uniform(0.04, 0.5), rng.uniform(0.05, 0.6))
        for _ in range(n)
    ]


@pytest.mark.parametrize("L, V, mw, mb", random_wells(5, seed=7))
def test_matches_shooting_oracle(L, V, mw, mb):
    assert ground_state_energy(L, V, mw, mb) == pytest.approx(shooting_ground_state(L, V, mw, mb), abs=1e-6)


def test_infinite_well_limit():
    assert infinite_well_energy(50.0, 0.1) == pytest.approx(0.1504, abs=2e-4)
    E = [ground_state_energy(50.0, V, 0.1, 0.1) for V in (0.1, 0.5, 2.0, 10.0, 100.0, 1e4, 1e7)]
    assert np.all(np.diff(E) > 0)
    assert E[-1] < infinite_well_energy(50.0, 0.1)
    # leading finite-barrier correction is 4 / (kappa L), ~1.6e-4 here
    assert E[-1] == pytest.approx(infinite_well_energy(50.0, 0.1), rel=3e-4)


def test_vanishing_confinement():
    assert ground_state_energy(50.0, 1e-6, 0.1, 0.1) < 1e-6


def test_paper_cb_well_between_limits():
    s = build_stack(paper_layer_spec())
    w = lookup("GaInP-well")
    assert 0 < s.e0_c < min(infinite_well_energy(50.0, w.m_e), s.layers.conduction_band_offset)
    assert 0 < s.e0_v < min(infinite_well_energy(50.0, w.m_hh), s.layers.valence_band_offset)


@given(st.floats(20.0, 200.0), st.floats(1.0, 20.0))
def test_energy_rises_as_well_narrows(L, dL):
    assert ground_state_energy(L, 0.3, 0.1, 0.15) > ground_state_energy(L + dL, 0.3, 0.1, 0.15)


def test_envelope_properties():
    s = ground_state(50.0, 0.28, 0.1, 0.15)
    phi, x = s.samples, s.x
    assert np.sum(phi * phi) * s.grid_step == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(phi, phi[::-1], atol=1e-12)
    right = phi[x > 25.0]
    assert np.all(np.diff(right) < 0)


def test_overlap_identities():
    s = ground_state(50.0, 0.28, 0.1, 0.15)
    assert envelope_overlap(s, s) == pytest.approx(1.0, abs=1e-12)
    odd = s.samples * s.x
    odd = odd / np.sqrt(np.sum(odd * odd) * s.grid_step)
    assert envelope_overlap(s, dataclasses.replace(s, samples=odd)) == pytest.approx(0.0, abs=1e-12)


def test_overlap_symmetry_and_sign():
    st_ = build_stack(paper_layer_spec())
    c = ground_state(50.0, 0.28, 0.1, 0.15, "CB", 120.0)
    v = ground_state(50.0, 0.14, 0.4, 0.45, "VB", 120.0)
    o = envelope_overlap(c, v)
    assert o == envelope_overlap(v, c)
    assert o == pytest.approx(envelope_overlap(dataclasses.replace(c, samples=-c.samples), v), rel=1e-15)
    assert 0.9 < st_.overlap_sq < 1.0


def test_overlap_grid_mismatch():
    a = ground_state(50.0, 0.28, 0.1, 0.15, half_span=100.0)
    b = ground_state(50.0, 0.28, 0.1, 0.15, half_span=120.0)
    with pytest.raises(ValueError):
        envelope_overlap(a, b)
    with pytest.raises(ValueError):
        envelope_overlap(a, EnvelopeState("VB", 0.0, a.samples[:-1], a.grid_step, 1.0))


def test_unbound_valence_state():
    spec = dataclasses.replace(paper_layer_spec(), valence_band_offset=0.0)
    with pytest.raises(QWSolverError):
        build_stack(spec)


def test_bound_states_below_offsets():
    s = build_stack(paper_layer_spec())
    assert 0 < s.e0_c < s.layers.conduction_band_offset
    assert 0 < s.e0_v < s.layers.valence_band_offset


def test_paper_stack_transition_gap():
    # pair energy twice the 0.98 eV centre
    s = build_stack(paper_layer_spec(frozen_calibration().qw_strain_shift))
    assert s.transition_gap == pytest.approx(1.96, abs=0.06)
