"""Monte Carlo of the pulsed Si / gated-InGaAs coincidence experiment.

Pulses are simulated as gate slots.  A pair emitted in a slot is seen by
each counter independently; the InGaAs counter adds dark counts and
afterpulses from a single exponential trap.  Delays are in microseconds;
a positive delay pairs each Si click with the InGaAs record that many
periods later.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _kernels as K
from .constants import DomainError

AP_FLOOR = 1e-6
CHUNK = 1 << 20


@dataclass(frozen=True)
class CoincidenceConfig:
    pulse_width: float = 10.0  # ns
    period: float = 10.0  # us
    n_pulses: int = 1_000_000
    pair_prob_per_pulse: float = 0.03
    eta_si: float = 0.33
    eta_ingaas: float = 0.10
    dark_prob_si: float = 5e-4
    dark_prob_ingaas: float = 1e-3
    p0_afterpulse: float = 0.05
    tau_trap: float = 50.0  # us
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("pair_prob_per_pulse", "eta_si", "eta_ingaas", "dark_prob_si",
                     "dark_prob_ingaas", "p0_afterpulse"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} = {v} is not a probability")
        if self.pulse_width <= 0 or self.period * 1e3 <= self.pulse_width:
            raise DomainError("need 0 < pulse_width < period")
        if self.tau_trap <= 0:
            raise DomainError("tau_trap must be positive")
        if self.n_pulses < 1:
            raise DomainError("n_pulses must be >= 1")
        if not (0 <= self.rng_seed < 2**64):
            raise DomainError("rng_seed must be an unsigned 64-bit integer")

    @property
    def decay(self) -> float:
        return math.exp(-self.period / self.tau_trap)


@dataclass(frozen=True)
class CoincidenceResult:
    delays: np.ndarray  # us
    coincidence_fraction: np.ndarray
    stderr: np.ndarray
    si_singles: int
    ingaas_singles: int
    n_pulses: int
    background: float
    period: float = 10.0  # us

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_us", "fraction", "stderr", "background"])
            for d, f, s in zip(self.delays, self.coincidence_fraction, self.stderr):
                w.writerow([repr(float(d)), repr(float(f)), repr(float(s)), repr(float(self.background))])


def afterpulse_prob(dt, p0, tau_trap):
    """Afterpulse probability at time dt [us] after the last avalanche."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise DomainError("dt must be non-negative")
    out = p0 * np.exp(-dt / tau_trap)
    return float(out) if out.ndim == 0 else out


def default_delays(period: float = 10.0, n: int = 30) -> np.ndarray:
    k = np.arange(-n, n + 1)
    return k * period


def _records(cfg: CoincidenceConfig):
    rng = np.random.default_rng(cfg.rng_seed)
    si = np.empty(cfg.n_pulses, dtype=np.uint8)
    ing = np.empty(cfg.n_pulses, dtype=np.uint8)
    since = -1
    for start in range(0, cfg.n_pulses, CHUNK):
        stop = min(start + CHUNK, cfg.n_pulses)
        u = rng.random((stop - start, 6))
        s, g, since = K.coincidence_stream(
            u, cfg.pair_prob_per_pulse, cfg.eta_si, cfg.eta_ingaas, cfg.dark_prob_si,
            cfg.dark_prob_ingaas, cfg.p0_afterpulse, cfg.decay, AP_FLOOR, since,
        )
        si[start:stop] = s
        ing[start:stop] = g
    # dark clicks of the free-running Si counter in off-gate windows, used
    # for delays that are not a whole number of periods
    off = (rng.random(cfg.n_pulses) < cfg.dark_prob_si).astype(np.uint8)
    return si, ing, off


def _split_delay(d: float, cfg: CoincidenceConfig):
    """Whole-period offset, and whether the shifted window still overlaps a gate."""
    k = round(d / cfg.period)
    aligned = abs(d - k * cfg.period) * 1e3 < cfg.pulse_width
    return int(k), aligned


def simulate(cfg: CoincidenceConfig, delays=None) -> CoincidenceResult:
    """Coincidence fraction (coincidences / Si singles) versus relative delay."""
    delays = default_delays(cfg.period) if delays is None else np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise DomainError("empty delay list")
    si, ing, off = _records(cfg)
    n = cfg.n_pulses
    frac = np.empty(delays.size)
    err = np.empty(delays.size)
    n_si = int(si.sum())
    for j, d in enumerate(delays):
        k, aligned = _split_delay(float(d), cfg)
        src = si if aligned else off
        if abs(k) >= n:
            frac[j], err[j] = 0.0, 0.0
            continue
        # Si at slot i meets InGaAs at slot i + k
        if k >= 0:
            a, b = src[: n - k], ing[k:]
        else:
            a, b = src[-k:], ing[: n + k]
        singles = int(si[: a.size].sum()) if k >= 0 else int(si[-k:].sum())
        hits = int(np.count_nonzero(a & b))
        f = hits / singles if singles else 0.0
        frac[j] = f
        # binomial error, floored at one count so empty bins are not exact
        err[j] = math.sqrt(max(f * (1 - f), 1.0 / singles) / singles) if singles else 0.0
    return CoincidenceResult(
        delays=delays,
        coincidence_fraction=frac,
        stderr=err,
        si_singles=n_si,
        ingaas_singles=int(ing.sum()),
        n_pulses=n,
        background=float(accidental_background(cfg)),
        period=cfg.period,
    )


def ingaas_firing_probability(cfg: CoincidenceConfig) -> float:
    """Stationary per-gate firing probability of the InGaAs counter.

    Avalanches reset the trap, so firings form a renewal process; the rate
    is the inverse mean gap between avalanches.
    """
    base = 1.0 - (1.0 - cfg.pair_prob_per_pulse * cfg.eta_ingaas) * (1.0 - cfg.dark_prob_ingaas)
    span = K._trap_span(cfg.p0_afterpulse, cfg.decay, AP_FLOOR)
    e = np.arange(1, span + 1)
    p_ap = cfg.p0_afterpulse * cfg.decay**e
    # survival through the trap window, then a geometric tail at the base rate
    surv = np.cumprod((1.0 - base) * (1.0 - p_ap)) if span else np.empty(0)
    if base <= 0:
        return 0.0
    tail = surv[-1] if span else 1.0
    mean_gap = 1.0 + surv.sum() + tail * (1.0 - base) / base
    return 1.0 / mean_gap


def si_firing_probability(cfg: CoincidenceConfig) -> float:
    return 1.0 - (1.0 - cfg.pair_prob_per_pulse * cfg.eta_si) * (1.0 - cfg.dark_prob_si)


def accidental_background(cfg: CoincidenceConfig) -> float:
    """Coincidence fraction expected from uncorrelated clicks.

    The per-gate accidental coincidence probability is P_si * P_ingaas;
    normalized by Si singles it is the InGaAs firing probability.
    """
    p_si = si_firing_probability(cfg)
    if p_si == 0:
        return 0.0
    return p_si * ingaas_firing_probability(cfg) / p_si


@dataclass(frozen=True)
class DecayFit:
    tau: float  # us
    tau_err: float
    amplitude: float
    background: float


def fit_afterpulse_decay(result: CoincidenceResult, max_delay: float | None = None) -> DecayFit:
    """Weighted fit of background + A exp(-delay/tau) to the positive integer delays.

    The background is pinned to the pooled negative-delay fraction when the
    scan has negative delays, and fitted otherwise.
    """
    d = result.delays
    whole = np.isclose(d / result.period, np.round(d / result.period))
    sel = (d > 0) & whole
    if max_delay is not None:
        sel &= d <= max_delay
    x, y, s = d[sel], result.coincidence_fraction[sel], result.stderr[sel]
    if x.size < 4:
        raise ValueError("need at least four positive delays to fit")
    s = np.where(s > 0, s, s[s > 0].min() if np.any(s > 0) else 1.0)
    neg = (d < 0) & whole
    a0 = max(y[0] - y[-1], 1e-6) * math.exp(x[0] / 50.0)
    if np.any(neg):
        bg = float(result.coincidence_fraction[neg].mean())
        popt, pcov = optimize.curve_fit(
            lambda t, a, tau: bg + a * np.exp(-t / tau), x, y, p0=(a0, 50.0), sigma=s,
            absolute_sigma=True, bounds=([0, 1e-3], [1, 1e4]), maxfev=20000,
        )
        return DecayFit(float(popt[1]), float(math.sqrt(pcov[1, 1])), float(popt[0]), bg)
    popt, pcov = optimize.curve_fit(
        lambda t, a, tau, b: b + a * np.exp(-t / tau), x, y, p0=(a0, 50.0, float(y[-1])), sigma=s,
        absolute_sigma=True, bounds=([0, 1e-3, 0], [1, 1e4, 1]), maxfev=20000,
    )
    return DecayFit(float(popt[1]), float(math.sqrt(pcov[1, 1])), float(popt[0]), float(popt[2]))
