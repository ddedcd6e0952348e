"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported from the same module, so one process
measures both; results are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from tpespec import _kernels as K
from tpespec.carriers import make_carrier_state
from tpespec.constants import HBAR_EVS
from tpespec.materials import lookup
from tpespec.spectra import _k_weights, _medium, CollectionGeometry


def _best(fn, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        t.append(time.perf_counter() - t0)
    return min(t)


def cases():
    mat = lookup("GaAs")
    st = make_carrier_state(mat, 1.2e18, 330.0, C_bgr=0.04)
    med = _medium(st, mat, CollectionGeometry(volume_or_area=1e-9))
    k, wq = K.composite_nodes(0.0, 1.2e9, 64)
    E21 = med.edge + med.x_of_k(k)
    pref = wq * _k_weights(st, med, k)
    E1 = np.linspace(0.55, 1.15, 601)
    idx = med.index
    args_s = (E1, E21, pref, st.gamma, HBAR_EVS) + tuple(idx)
    args_p = (E21[::4].copy(), st.gamma, HBAR_EVS) + tuple(idx) + (K.GL_X, K.GL_W, K.PAIR_PANELS, K.PAIR_FLOOR)
    u = np.random.default_rng(0).random((1_000_000, 6))
    args_c = (u, 0.03, 0.33, 0.1, 5e-4, 1e-3, 0.05, np.exp(-0.2), 1e-6, -1)
    return [
        ("spectrum_sum 601x1024", K._spectrum_numba, K._spectrum_numpy, args_s),
        ("pair_integral 256", K._pair_numba, K._pair_numpy, args_p),
        ("coincidence 1e6 pulses", K._coincidence_numba, K._coincidence_numpy, args_c),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba disabled; both columns time the numpy path")
    print(f"{'kernel':<26}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fast, slow, a in cases():
        ra, rb = fast(*a), slow(*a)
        if isinstance(ra, tuple):
            assert all(np.array_equal(x, y) for x, y in zip(ra, rb)), name
        else:
            np.testing.assert_allclose(ra, rb, rtol=1e-10)
        fast(*a)  # compile outside the timing
        tf, ts = _best(lambda: fast(*a), args.repeat), _best(lambda: slow(*a), args.repeat)
        print(f"{name:<26}{tf * 1e3:>12.2f}{ts * 1e3:>12.2f}{ts / tf:>10.1f}")


if __name__ == "__main__":
    main()
