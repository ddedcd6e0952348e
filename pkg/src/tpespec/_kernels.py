"""Inner loops of the spectral integrals and the detector Monte Carlo.

Each kernel has a numba version and a pure-numpy version with the same
signature.  Set ``TPESPEC_DISABLE_NUMBA=1`` (or numba's own
``NUMBA_DISABLE_JIT=1``) before import to force the numpy path.
"""

import os

import numpy as np

_DISABLED = os.environ.get("TPESPEC_DISABLE_NUMBA", "") not in ("", "0") or os.environ.get(
    "NUMBA_DISABLE_JIT", ""
) not in ("", "0")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# Gauss-Legendre rule used for every composite quadrature
GL_ORDER = 16
GL_X, GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


def composite_nodes(a, b, panels):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * GL_X[None, :]).ravel()
    w = (half[:, None] * GL_W[None, :]).ravel()
    return x, w


# ------------------------------------------------------------ index model
# kind 0: constant params[0]; kind 1: Wemple oscillator params (E0, Ed)


@njit(cache=True)
def _index_scalar(E, kind, p0, p1, lo, hi):
    if kind == 0:
        return p0
    if E < lo:
        E = lo
    elif E > hi:
        E = hi
    return np.sqrt(1.0 + p0 * p1 / (p0 * p0 - E * E))


def _index_np(E, kind, p0, p1, lo, hi):
    if kind == 0:
        return np.full(np.shape(E), p0)
    E = np.clip(E, lo, hi)
    return np.sqrt(1.0 + p0 * p1 / (p0 * p0 - E * E))


# ------------------------------------------------------------ resonance factor


@njit(cache=True)
def _resonance_scalar(w1, w2, gamma):
    """w1 w2 |1/(i w1 + G) + 1/(i w2 + G)|^2."""
    d1 = gamma * gamma + w1 * w1
    d2 = gamma * gamma + w2 * w2
    re = gamma / d1 + gamma / d2
    im = w1 / d1 + w2 / d2
    return w1 * w2 * (re * re + im * im)


def resonance_np(w1, w2, gamma):
    d1 = gamma * gamma + w1 * w1
    d2 = gamma * gamma + w2 * w2
    re = gamma / d1 + gamma / d2
    im = w1 / d1 + w2 / d2
    return w1 * w2 * (re * re + im * im)


# ------------------------------------------------------------ spectral kernel


@njit(cache=True)
def _spectrum_numba(E1, E21, pref, gamma, hbar, kind, p0, p1, lo, hi):
    out = np.zeros(E1.size)
    for i in range(E1.size):
        e1 = E1[i]
        n1 = _index_scalar(e1, kind, p0, p1, lo, hi)
        w1 = e1 / hbar
        acc = 0.0
        for j in range(E21.size):
            e2 = E21[j] - e1
            if e2 <= 0.0:
                continue
            n2 = _index_scalar(e2, kind, p0, p1, lo, hi)
            acc += pref[j] * n2 * _resonance_scalar(w1, e2 / hbar, gamma)
        out[i] = n1 * acc
    return out


def _spectrum_numpy(E1, E21, pref, gamma, hbar, kind, p0, p1, lo, hi):
    e1 = E1[:, None]
    e2 = E21[None, :] - e1
    ok = e2 > 0
    e2s = np.where(ok, e2, 1.0)
    val = pref[None, :] * _index_np(e2s, kind, p0, p1, lo, hi) * resonance_np(e1 / hbar, e2s / hbar, gamma)
    val = np.where(ok, val, 0.0)
    return _index_np(E1, kind, p0, p1, lo, hi) * val.sum(axis=1)


def spectrum_sum(E1, E21, pref, gamma, hbar, index):
    """sum_j pref_j n(E1) n(E21_j - E1) R(E1, E21_j - E1) for every E1.

    ``index`` is the tuple (kind, p0, p1, lo, hi); energies in eV, gamma in
    s^-1, hbar in eV s.  Pairs with E21_j <= E1 contribute nothing.
    """
    args = (np.ascontiguousarray(E1, float), np.ascontiguousarray(E21, float),
            np.ascontiguousarray(pref, float), float(gamma), float(hbar)) + tuple(index)
    if HAVE_NUMBA:
        return _spectrum_numba(*args)
    return _spectrum_numpy(*args)


# ------------------------------------------------------------ full-range pair kernel

PAIR_PANELS = 48
PAIR_FLOOR = 1e-7  # lower limit of omega_1 in units of gamma


@njit(cache=True)
def _pair_numba(E21, gamma, hbar, kind, p0, p1, lo, hi, gx, gw, panels, floor):
    out = np.zeros(E21.size)
    for j in range(E21.size):
        W = E21[j] / hbar
        a = np.log(floor * gamma)
        b = np.log(0.5 * W)
        h = (b - a) / panels
        acc = 0.0
        for p in range(panels):
            mid = a + (p + 0.5) * h
            for q in range(gx.size):
                v = mid + 0.5 * h * gx[q]
                w1 = np.exp(v)
                w2 = W - w1
                n1 = _index_scalar(w1 * hbar, kind, p0, p1, lo, hi)
                n2 = _index_scalar(w2 * hbar, kind, p0, p1, lo, hi)
                acc += 0.5 * h * gw[q] * w1 * n1 * n2 * _resonance_scalar(w1, w2, gamma)
        out[j] = 2.0 * acc
    return out


def _pair_numpy(E21, gamma, hbar, kind, p0, p1, lo, hi, gx, gw, panels, floor):
    W = E21[:, None] / hbar
    a = np.log(floor * gamma)
    b = np.log(0.5 * W)
    t, wt = composite_nodes(0.0, 1.0, panels)
    v = a + (b - a) * t[None, :]
    w1 = np.exp(v)
    w2 = W - w1
    f = w1 * _index_np(w1 * hbar, kind, p0, p1, lo, hi) * _index_np(w2 * hbar, kind, p0, p1, lo, hi)
    f = f * resonance_np(w1, w2, gamma)
    return 2.0 * (b[:, 0] - a) * (f * wt[None, :]).sum(axis=1)


def pair_integral(E21, gamma, hbar, index, panels=PAIR_PANELS):
    """Integral over omega_1 in (0, E21/hbar) of n1 n2 R(w1, w2), per pair energy.

    Uses exchange symmetry (integrate to the midpoint, double) and a
    logarithmic variable so the dephasing-width edge resonances are resolved.
    """
    args = (np.ascontiguousarray(E21, float), float(gamma), float(hbar)) + tuple(index)
    args = args + (GL_X, GL_W, int(panels), PAIR_FLOOR)
    if HAVE_NUMBA:
        return _pair_numba(*args)
    return _pair_numpy(*args)


# ------------------------------------------------------------ coincidence Monte Carlo


@njit(cache=True)
def _coincidence_numba(u, p_pair, eta_si, eta_in, dark_si, dark_in, p0, decay, ap_floor, since):
    n = u.shape[0]
    si = np.zeros(n, dtype=np.uint8)
    ing = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        pair = u[i, 0] < p_pair
        s = (pair and u[i, 1] < eta_si) or u[i, 2] < dark_si
        g = (pair and u[i, 3] < eta_in) or u[i, 4] < dark_in
        if since >= 0:
            pap = p0 * decay ** (since + 1)
            if pap < ap_floor:
                since = -1
            elif u[i, 5] < pap:
                g = True
        if g:
            since = 0
        elif since >= 0:
            since += 1
        si[i] = s
        ing[i] = g
    return si, ing, since


def _trap_span(p0, decay, ap_floor):
    """Largest exponent e with p0 * decay**e >= ap_floor (0 if none)."""
    if p0 < ap_floor or decay <= 0.0:
        return 0
    e = int(np.floor(np.log(ap_floor / p0) / np.log(decay))) if decay < 1 else 10**12
    while e > 0 and p0 * decay**e < ap_floor:
        e -= 1
    while p0 * decay ** (e + 1) >= ap_floor:
        e += 1
    return e


def _coincidence_numpy(u, p_pair, eta_si, eta_in, dark_si, dark_in, p0, decay, ap_floor, since):
    pair = u[:, 0] < p_pair
    si = (pair & (u[:, 1] < eta_si)) | (u[:, 2] < dark_si)
    base = (pair & (u[:, 3] < eta_in)) | (u[:, 4] < dark_in)
    ing = base.astype(np.uint8)
    if p0 <= 0:
        return si.astype(np.uint8), ing, -1
    # afterpulsing depends on the firing history, so only the gaps between
    # avalanches are walked; within a gap the trap probability is a vector
    ap = u[:, 5]
    n = u.shape[0]
    span = _trap_span(p0, decay, ap_floor)
    i = 0
    if since < 0:
        nxt = np.flatnonzero(base)
        if nxt.size == 0:
            return si.astype(np.uint8), ing, -1
        i, since = int(nxt[0]) + 1, 0
    while i < n:
        # gates i .. i+m-1 see trap probability p0 * decay**(since+1+j)
        m = min(max(span - since, 0), n - i)
        if m == 0:
            nxt = np.flatnonzero(base[i:])
            if nxt.size == 0:
                return si.astype(np.uint8), ing, -1
            i, since = i + int(nxt[0]) + 1, 0
            continue
        j = np.arange(m)
        fire = base[i:i + m] | (ap[i:i + m] < p0 * decay ** (since + 1 + j))
        hit = np.flatnonzero(fire)
        if hit.size == 0:
            i += m
            since += m
            continue
        h = int(hit[0])
        ing[i + h] = 1
        i, since = i + h + 1, 0
    return si.astype(np.uint8), ing, since


def coincidence_stream(u, p_pair, eta_si, eta_in, dark_si, dark_in, p0, decay, ap_floor, since=-1):
    """Per-pulse click records of the free-running Si and gated InGaAs counters.

    ``u`` holds six uniform variates per pulse.  ``decay`` is exp(-period/tau).
    The afterpulse probability at a gate is p0 * decay**m with m gates since
    the last avalanche, so afterpulses re-arm the trap (self-exciting chain).
    ``since`` carries that count across consecutive chunks (-1: trap empty);
    the updated value is returned third.
    """
    args = (np.ascontiguousarray(u), float(p_pair), float(eta_si), float(eta_in),
            float(dark_si), float(dark_in), float(p0), float(decay), float(ap_floor), int(since))
    if HAVE_NUMBA:
        si, ing, since = _coincidence_numba(*args)
    else:
        si, ing, since = _coincidence_numpy(*args)
    return si, ing, int(since)
