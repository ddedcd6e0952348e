"""tpespec command-line interface.

Exit codes: 0 success, 1 usage or config error, 2 physics-domain error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import spectra as S
from .calibrate import CalibrationError, calibrate
from .calibration_data import ENV_VAR as CAL_ENV, shipped_path
from .coincidence import fit_afterpulse_decay, simulate
from .config import COMMANDS, ConfigError, SimulationPlan, echo_text, parse_config
from .constants import HC_EVNM, DomainError
from .quantumwell import QWSolverError
from .svgplot import Arrow, Panel, Series, render

OUT_ENV = "TPESPEC_OUT"
EXIT_OK, EXIT_PARSE, EXIT_PHYSICS, EXIT_IO = 0, 1, 2, 3


class PhysicsError(RuntimeError):
    pass


# --------------------------------------------------------------- writers


def write_summary(path, items) -> None:
    """``key = value`` lines, one per quantity, in insertion order."""
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, np.generic):
                v = v.item()
            if isinstance(v, float):
                v = repr(v)
            fh.write(f"{k} = {v}\n")


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def write_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# --------------------------------------------------------------- commands


def _spectrum_frame(spec, res):
    return S.convolve_instrument(spec, res) if res > 0 else spec


def _run_spectrum(plan: SimulationPlan, out: Path):
    grid = plan.grid.energies()
    st, sysobj, geom = plan.state, plan.system_obj, plan.geometry
    spec = S.spontaneous_spectrum(st, sysobj, geom, grid)
    conv = _spectrum_frame(spec, plan.grid.resolution_nm)
    write_csv(out / "spectrum.csv", ["energy_eV", "wavelength_nm", "rate_per_eV", "rate_per_eV_convolved"],
              [grid, HC_EVNM / grid, spec.values, conv.values])
    center = S.tpe_center(st, sysobj, geom)
    rate, power = S.tpe_total_rates(st, sysobj, geom)
    summary = {
        "command": plan.command, "system": plan.system, "density_cm3": st.n, "temperature_K": st.T,
        "Eg_eff_eV": st.Eg_eff, "eta_c": st.eta_c, "eta_v": st.eta_v,
        "tpe_center_eV": center,
        "tpe_power_window_W": S.total_power(spec),
        "tpe_power_total_W": power * geom.collection,
        "tpe_photon_rate_total_per_s": rate * geom.collection,
    }
    inset = None
    if plan.system == "qw":
        summary["transition_edge_eV"] = plan.stack.edge(st.Eg_eff)
        summary["overlap_sq"] = plan.stack.overlap_sq
        ogrid = np.linspace(plan.stack.edge(st.Eg_eff) - 0.05, plan.stack.edge(st.Eg_eff) + 0.3, 351)
        one = S.one_photon_spectrum(st, sysobj, geom, ogrid)
        r1, p1 = S.one_photon_total_rates(st, sysobj, geom)
        summary["onephoton_power_W"] = p1 * geom.collection
        summary["tpe_to_onephoton_power_ratio"] = power / p1
        summary["onephoton_peak_eV"] = float(ogrid[np.argmax(one.values)])
        write_csv(out / "onephoton.csv", ["energy_eV", "rate_per_eV"], [ogrid, one.values])
        inset = Panel([Series(ogrid, one.values / one.values.max(), "one-photon")], "energy (eV)", "norm.")
    main = Panel(
        [Series(grid, conv.values, "spontaneous TPE")], "photon energy (eV)", "rate (1/s/eV)",
        title=f"{plan.label}: spontaneous TPE, n = {st.n:.3g} cm^-3, T = {st.T:g} K",
        arrows=[Arrow(center, "center")],
    )
    (out / "spectrum.svg").write_text(render(main, inset))
    return summary


def _stim_component(plan, stim, grid):
    st = plan.state
    if plan.carrier_budget:
        pump = S.total_recombination(st, plan.system_obj, None, plan.geometry)
        st = S.steady_state_balance(pump, st, stim, plan.system_obj, plan.geometry)
    comp = S.stimulated_component(st, plan.system_obj, stim, plan.geometry, grid)
    return st, comp


def _complementary_peak(grid, comp, stim, res):
    """Strongest maximum of the stimulation-induced component away from the E_s line."""
    spec = S.Spectrum(grid, comp, "stimulation-induced")
    if res > 0:
        spec = S.convolve_instrument(spec, res)
    peaks = S.find_peaks(spec)
    lw = float(S.instrument_fwhm(stim.E_s, res)) if res > 0 else 2 * spec.step
    comp_peaks = [p for p in peaks if abs(p[0] - stim.E_s) > 2 * lw]
    return spec, peaks, (comp_peaks[0] if comp_peaks else (float("nan"), float("nan")))


def _run_stimulated(plan: SimulationPlan, out: Path):
    grid = plan.grid.energies()
    res = plan.grid.resolution_nm
    sysobj, geom = plan.system_obj, plan.geometry
    spont = S.spontaneous_spectrum(plan.state, sysobj, geom, grid)
    center = S.tpe_center(plan.state, sysobj, geom)
    header = ["energy_eV", "wavelength_nm", "spontaneous"]
    cols = [grid, HC_EVNM / grid, _spectrum_frame(spont, res).values]
    series = [Series(grid, cols[2], "spontaneous")]
    arrows = [Arrow(center, "center", color="#555555")]
    summary = {"command": plan.command, "system": plan.system, "density_cm3": plan.state.n,
               "tpe_center_eV": center, "n_stimulations": len(plan.stimulations)}
    for i, stim in enumerate(plan.stimulations):
        st, comp = _stim_component(plan, stim, grid)
        base = spont if st is plan.state else S.spontaneous_spectrum(st, sysobj, geom, grid)
        total = S.Spectrum(grid, base.values + comp, "stimulated-TPE")
        ind, peaks, (e_c, h_c) = _complementary_peak(grid, comp, stim, res)
        tag = f"Es{stim.E_s:.4f}"
        header += [f"stimulated_{tag}", f"induced_{tag}"]
        cols += [_spectrum_frame(total, res).values, ind.values]
        series.append(Series(grid, cols[-2], f"stimulated E_s = {stim.E_s:.3f} eV"))
        predicted = 2 * center - stim.E_s
        arrows += [Arrow(stim.E_s, f"{stim.E_s:.3f}", color="#c0392b"),
                   Arrow(predicted, f"{predicted:.3f}", dashed=True, color="#2e8b57")]
        summary.update({
            f"stim{i}_E_s_eV": stim.E_s,
            f"stim{i}_power_W": stim.P_s,
            f"stim{i}_predicted_E_c_eV": predicted,
            f"stim{i}_complementary_peak_eV": e_c,
            f"stim{i}_complementary_height": h_c,
            f"stim{i}_pair_sum_minus_2center_eV": stim.E_s + e_c - 2 * center,
            f"stim{i}_n_peaks": len(peaks),
            f"stim{i}_peaks_eV": ", ".join(f"{p[0]!r}" for p in peaks),
            f"stim{i}_pair_rate_per_s": S.stimulated_pair_rate(st, sysobj, stim, geom),
            f"stim{i}_density_cm3": st.n,
        })
    write_csv(out / "stimulated.csv", header, cols)
    main = Panel(series, "photon energy (eV)", "rate (1/s/eV)",
                 title=f"{plan.label}: spontaneous and singly-stimulated TPE", arrows=arrows)
    (out / "stimulated.svg").write_text(render(main))
    return summary


def _run_onephoton(plan: SimulationPlan, out: Path):
    grid = plan.grid.energies()
    st, sysobj, geom = plan.state, plan.system_obj, plan.geometry
    spec = S.one_photon_spectrum(st, sysobj, geom, grid)
    conv = _spectrum_frame(spec, plan.grid.resolution_nm)
    write_csv(out / "onephoton.csv", ["energy_eV", "wavelength_nm", "rate_per_eV", "rate_per_eV_convolved"],
              [grid, HC_EVNM / grid, spec.values, conv.values])
    r1, p1 = S.one_photon_total_rates(st, sysobj, geom)
    r2, p2 = S.tpe_total_rates(st, sysobj, geom)
    edge = plan.stack.edge(st.Eg_eff) if plan.system == "qw" else st.Eg_eff
    summary = {
        "command": plan.command, "system": plan.system, "density_cm3": st.n,
        "edge_eV": edge, "onephoton_peak_eV": float(grid[np.argmax(spec.values)]),
        "onephoton_power_W": p1 * geom.collection, "tpe_power_total_W": p2 * geom.collection,
        "tpe_to_onephoton_power_ratio": p2 / p1,
    }
    main = Panel([Series(grid, conv.values, "one-photon")], "photon energy (eV)", "rate (1/s/eV)",
                 title=f"{plan.label}: one-photon emission", arrows=[Arrow(edge, "edge")])
    (out / "onephoton.svg").write_text(render(main))
    return summary


def _run_sweep(plan: SimulationPlan, out: Path):
    grid = plan.grid.energies()
    res = plan.grid.resolution_nm
    base = plan.stimulations[0]
    powers = plan.sweep.powers_W()
    heights, energies = [], []
    for P in powers:
        stim = replace(base, P_s=float(P))
        _, comp = _stim_component(plan, stim, grid)
        _, _, (e_c, h_c) = _complementary_peak(grid, comp, stim, res)
        heights.append(h_c)
        energies.append(e_c)
    heights = np.array(heights)
    slope, intercept = np.polyfit(powers, heights, 1)
    pred = slope * powers + intercept
    ss_res = float(np.sum((heights - pred) ** 2))
    ss_tot = float(np.sum((heights - heights.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    write_csv(out / "sweep.csv", ["power_W", "complementary_peak_eV", "peak_height"],
              [powers, np.array(energies), heights])
    summary = {"command": plan.command, "system": plan.system, "E_s_eV": base.E_s,
               "points": len(powers), "fit_slope_per_W": float(slope),
               "fit_intercept": float(intercept), "fit_r2": r2,
               "mean_complementary_peak_eV": float(np.nanmean(energies))}
    main = Panel([Series(powers * 1e3, heights, "complementary peak", markers=True),
                  Series(powers * 1e3, pred, f"linear fit, R^2 = {r2:.6f}", dashed=True)],
                 "stimulation power (mW)", "peak height (1/s/eV)",
                 title=f"{plan.label}: complementary peak vs stimulation power")
    (out / "sweep.svg").write_text(render(main))
    return summary


def _run_coincidence(plan: SimulationPlan, out: Path):
    cfg = plan.coincidence
    r = simulate(cfg, np.array(plan.delays_us))
    r.to_csv(out / "coincidence.csv")
    d, f = r.delays, r.coincidence_fraction
    whole = np.isclose(d / cfg.period, np.round(d / cfg.period))
    neg = (d < 0) & whole
    zero = f[np.isclose(d, 0.0)]
    fit = fit_afterpulse_decay(r)
    summary = {
        "command": plan.command, "n_pulses": cfg.n_pulses, "seed": cfg.rng_seed,
        "si_singles": r.si_singles, "ingaas_singles": r.ingaas_singles,
        "si_counts_per_s": r.si_singles / (cfg.n_pulses * cfg.period * 1e-6),
        "ingaas_counts_per_s": r.ingaas_singles / (cfg.n_pulses * cfg.period * 1e-6),
        "zero_delay_fraction": float(zero[0]) if zero.size else float("nan"),
        "negative_delay_fraction": float(f[neg].mean()) if neg.any() else float("nan"),
        "accidental_background": r.background,
        "fit_tau_us": fit.tau, "fit_tau_err_us": fit.tau_err, "fit_amplitude": fit.amplitude,
    }
    if (~whole).any():
        summary["non_integer_delay_max_fraction"] = float(f[~whole].max())
    sel = whole
    curve = fit.background + fit.amplitude * np.exp(-d[d > 0] / fit.tau)
    main = Panel(
        [Series(d[sel], np.maximum(f[sel], 1e-6), "simulated", markers=True, yerr=r.stderr[sel]),
         Series(d[d > 0], curve, f"fit, tau = {fit.tau:.1f} us", dashed=True)],
        "relative delay (us)", "coincidences / Si singles", logy=True,
        title=f"{plan.label}: coincidences vs delay", hlines=[(r.background, "accidental background")],
    )
    (out / "coincidence.svg").write_text(render(main))
    return summary


def _run_calibrate(plan: SimulationPlan, out: Path):
    rep = calibrate(plan.calibration_targets)
    rep.calibration.dump(out / "calibration.cfg")
    target = None
    if plan.freeze_calibration:
        target = Path(os.environ.get(CAL_ENV) or str(shipped_path()))
        rep.calibration.dump(target)
    summary = {"command": plan.command, "C_bgr_eV": rep.calibration.C_bgr,
               "qw_strain_shift_eV": rep.calibration.qw_strain_shift}
    for (n, T, c), got in zip(plan.calibration_targets.bulk, rep.bulk_centers):
        summary[f"bulk_center_{n:.3g}_{T:g}K_eV"] = got
        summary[f"bulk_target_{n:.3g}_{T:g}K_eV"] = c
    summary["qw_center_eV"] = rep.qw_center
    summary["residual_eV2"] = rep.residual
    summary["frozen_to"] = str(target) if target else "not frozen"
    with open(out / "calibration_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "value", "objective"])
        w.writerows((a, repr(float(b)), repr(float(c))) for a, b, c in rep.trace)
    return summary


RUNNERS = {
    "spectrum": _run_spectrum,
    "stimulated": _run_stimulated,
    "onephoton": _run_onephoton,
    "sweep": _run_sweep,
    "coincidence": _run_coincidence,
    "calibrate": _run_calibrate,
}


def default_output_dir(command: str) -> Path:
    return Path(os.environ.get(OUT_ENV) or "tpespec-out") / command


def run(plan: SimulationPlan) -> dict:
    """Execute a plan, writing CSVs, SVG, ``summary`` and ``config.cfg`` to its output dir."""
    out = plan.output_dir or default_output_dir(plan.command)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(echo_text(plan))
    try:
        summary = RUNNERS[plan.command](plan, out)
    except (DomainError, QWSolverError, CalibrationError, ValueError, RuntimeError) as exc:
        raise PhysicsError(f"{plan.command}: {exc}") from exc
    summary = {"tpespec_version": __version__, **summary}
    write_summary(out / "summary", summary)
    return summary


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="tpespec", description="Two-photon emission spectra and coincidence simulations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="run configuration file (INI-style key = value)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command>)")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit), overrides the config")
    p.add_argument("--preset", help="shipped preset name (fig1a, fig1b, fig3a, fig3b, fig4); --config keys override it")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is None and args.preset is None:
        print("tpespec: error: give --config and/or --preset", file=sys.stderr)
        return EXIT_PARSE
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("tpespec: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_PARSE
    try:
        plan = parse_config(args.config, args.command, args.seed, args.out, args.preset)
    except ConfigError as exc:
        print(f"tpespec: config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"tpespec: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            summary = run(plan)
    except PhysicsError as exc:
        print(f"tpespec: physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"tpespec: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    out = plan.output_dir or default_output_dir(plan.command)
    print(f"wrote {out}")
    for k, v in summary.items():
        print(f"  {k} = {v}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
