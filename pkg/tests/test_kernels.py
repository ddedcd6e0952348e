import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from oracles import resonance_complex
from tpespec import _kernels as K
from tpespec.constants import HBAR_EVS

WEMPLE = (1, 3.507, 34.53, 0.3, 2.8)
CONST_N = (0, 3.4, 0.0, 0.3, 2.5)


@pytest.fixture(scope="module")
def spectrum_args():
    rng = np.random.default_rng(0)
    E21 = np.sort(rng.uniform(1.3, 1.8, 300))
    pref = rng.uniform(0.0, 1.0, 300)
    E1 = np.linspace(0.05, 1.75, 257)
    return (E1, E21, pref, 1e13, HBAR_EVS) + WEMPLE


def test_spectrum_backends_agree(spectrum_args):
    np.testing.assert_allclose(K._spectrum_numba(*spectrum_args), K._spectrum_numpy(*spectrum_args),
                               rtol=1e-12)


def test_pair_backends_agree():
    E21 = np.linspace(1.3, 1.9, 40)
    args = (E21, 1e13, HBAR_EVS) + WEMPLE + (K.GL_X, K.GL_W, K.PAIR_PANELS, K.PAIR_FLOOR)
    np.testing.assert_allclose(K._pair_numba(*args), K._pair_numpy(*args), rtol=1e-12)


@pytest.mark.parametrize("E21, gamma", [(1.4, 1e13), (1.8, 1e12), (0.9, 5e13)])
def test_pair_integral_against_quad(E21, gamma):
    W = E21 / HBAR_EVS

    def f(w1):
        return 3.4 * 3.4 * resonance_complex(w1 * HBAR_EVS, (W - w1) * HBAR_EVS, gamma)

    # split at the dephasing-width resonances near both ends
    pts = [0.0, 10 * gamma, 1e3 * gamma, W / 2, W - 1e3 * gamma, W - 10 * gamma, W]
    ref = sum(integrate.quad(f, a, b, limit=400, epsrel=1e-11)[0] for a, b in zip(pts[:-1], pts[1:]))
    got = K.pair_integral(np.array([E21]), gamma, HBAR_EVS, CONST_N)[0]
    assert got == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("p0", [0.0, 0.05, 0.4])
def test_coincidence_backends_bit_identical(p0):
    u = np.random.default_rng(3).random((200_000, 6))
    args = (u, 0.03, 0.33, 0.1, 5e-4, 1e-3, p0, math.exp(-0.2), 1e-6, -1)
    a, b = K._coincidence_numba(*args), K._coincidence_numpy(*args)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_coincidence_chunking_invariant():
    u = np.random.default_rng(4).random((100_000, 6))
    rest = (0.05, 0.5, 0.5, 1e-3, 1e-3, 0.2, math.exp(-0.1), 1e-6)
    si, ing, _ = K.coincidence_stream(u, *rest)
    parts, since = [], -1
    for lo in range(0, u.shape[0], 7_777):
        s, g, since = K.coincidence_stream(u[lo:lo + 7_777], *rest, since=since)
        parts.append((s, g))
    np.testing.assert_array_equal(si, np.concatenate([p[0] for p in parts]))
    np.testing.assert_array_equal(ing, np.concatenate([p[1] for p in parts]))


def test_trap_span():
    span = K._trap_span(0.05, math.exp(-0.2), 1e-6)
    assert 0.05 * math.exp(-0.2) ** span >= 1e-6 > 0.05 * math.exp(-0.2) ** (span + 1)
    assert K._trap_span(0.0, 0.5, 1e-6) == 0


_PROBE = """
import json, numpy as np
from tpespec import _kernels as K
from tpespec.carriers import make_carrier_state
from tpespec.materials import lookup
from tpespec.spectra import spontaneous_bulk_spectrum, CollectionGeometry
from tpespec.coincidence import CoincidenceConfig, simulate
m = lookup("GaAs")
s = make_carrier_state(m, 1.2e18, 330.0)
v = spontaneous_bulk_spectrum(s, m, CollectionGeometry(volume_or_area=1e-9), np.linspace(0.6, 1.1, 51)).values
r = simulate(CoincidenceConfig(n_pulses=100000, rng_seed=9))
print(json.dumps({"numba": K.HAVE_NUMBA, "spec": v.tolist(), "coinc": r.coincidence_fraction.tolist()}))
"""


def _probe(disable):
    env = dict(os.environ)
    env.pop("NUMBA_DISABLE_JIT", None)
    env["TPESPEC_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_env_flag_selects_numpy_fallback():
    fast, slow = _probe(False), _probe(True)
    assert fast["numba"] is True and slow["numba"] is False
    np.testing.assert_allclose(fast["spec"], slow["spec"], rtol=1e-10)
    assert fast["coinc"] == slow["coinc"]
