"""Fit of the bandgap-shrinkage coefficient and QW strain shift to spectral centers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from scipy import optimize

from .calibration_data import Calibration
from .carriers import DEFAULT_GAMMA, make_carrier_state
from .materials import lookup
from .quantumwell import build_stack, paper_layer_spec
from .spectra import tpe_center

C_BGR_BOUNDS = (0.0, 0.2)  # eV
STRAIN_BOUNDS = (-0.3, 0.3)  # eV


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CalibrationTargets:
    material: str = "GaAs"
    # (density cm^-3, temperature K, target center eV)
    bulk: tuple = ((1.2e18, 330.0, 0.81), (2e18, 330.0, 0.84))
    qw_density: float = 2e18
    qw_temperature: float = 300.0
    qw_center: float = 0.98
    qw_layers: object = field(default_factory=paper_layer_spec)
    gamma: float = DEFAULT_GAMMA


@dataclass(frozen=True)
class CalibrationReport:
    calibration: Calibration
    bulk_centers: tuple
    qw_center: float
    residual: float
    trace: tuple


def bulk_centers(C_bgr: float, targets: CalibrationTargets) -> list[float]:
    mat = lookup(targets.material)
    out = []
    for n, T, _ in targets.bulk:
        st = make_carrier_state(mat, n, T, targets.gamma, C_bgr=C_bgr)
        out.append(tpe_center(st, mat))
    return out


def qw_center(C_bgr: float, strain_shift: float, targets: CalibrationTargets) -> float:
    stack = build_stack(replace(targets.qw_layers, strain_shift=strain_shift), T=targets.qw_temperature)
    st = make_carrier_state(
        stack.well, targets.qw_density, targets.qw_temperature, targets.gamma,
        well_width=stack.layers.well_width, C_bgr=C_bgr,
    )
    return tpe_center(st, stack)


def calibrate(targets: CalibrationTargets | None = None, xtol: float = 1e-10) -> CalibrationReport:
    """One-dimensional least-squares fit of C_bgr to the bulk centers, then
    the strain shift that puts the QW center on target."""
    targets = targets or CalibrationTargets()
    trace = []

    def cost(C):
        cs = bulk_centers(C, targets)
        r = sum((c - t[2]) ** 2 for c, t in zip(cs, targets.bulk))
        trace.append(("C_bgr", C, r))
        return r

    res = optimize.minimize_scalar(cost, bounds=C_BGR_BOUNDS, method="bounded", options={"xatol": xtol})
    if not res.success:
        raise CalibrationError(f"C_bgr search failed: {res.message}; trace tail {trace[-5:]}")
    C = float(res.x)

    def miss(s):
        c = qw_center(C, s, targets) - targets.qw_center
        trace.append(("strain_shift", s, c))
        return c

    try:
        s = optimize.brentq(miss, *STRAIN_BOUNDS, xtol=xtol)
    except ValueError as exc:
        raise CalibrationError(f"strain shift not bracketed in {STRAIN_BOUNDS}; trace tail {trace[-5:]}") from exc
    cal = Calibration(C_bgr=C, qw_strain_shift=float(s))
    return CalibrationReport(
        calibration=cal,
        bulk_centers=tuple(bulk_centers(C, targets)),
        qw_center=qw_center(C, s, targets),
        residual=float(res.fun),
        trace=tuple(trace),
    )
