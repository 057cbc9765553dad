"""``rotopump <command> --params <file> --out <dir> [--seed N] [--threads N] [--set key=value]...``"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import design, phonons, rates, rotor
from .config import RunParameters, load_run_parameters, parse_override
from .errors import ConfigError, RotopumpError
from .io import write_csv, write_json, write_manifest, write_plot_data
from .params import resonant_wavelength
from .verify import run_checks

COMMANDS = ("simulate", "rates", "phonon", "sweep", "design", "verify")


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    elif os.environ.get("ROTOPUMP_THREADS"):
        try:
            n = int(os.environ["ROTOPUMP_THREADS"])
        except ValueError:
            raise ConfigError("ROTOPUMP_THREADS must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def _simulate(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    v = p.values
    inertia = p.moment_of_inertia()
    detuning = p.field().detuning
    t_init = v["t_init_k"] if v["t_init_k"] is not None else rotor.t_init_for_width(v["sigma_m"], inertia, p.constants)
    state = rotor.thermal_initial_state(t_init, inertia, detuning=detuning, constants=p.constants)
    cfg = rotor.TrajectoryConfig(dt=v["dt_s"], t_total=v["t_total_s"], seed=seed, rates=p.rates(),
                                 snapshot_stride=v["snapshot_stride"], hop_factor=v["hop_factor"],
                                 max_sites=v["max_sites"], record_distributions=v["record_distributions"])
    n = v["n_trajectories"]
    series = rotor.run_ensemble(cfg, state, n, threads) if n > 1 else rotor.run_trajectory(cfg, state)
    files = [write_csv(out / "series.csv", {
        "t_s": series.times,
        "mean_lz_hbar": series.mean_lz,
        "var_lz_hbar2": series.variance,
        "e_rot_J": series.rotational_energy,
        "lz_second_moment_hbar2": series.lz_second_moment,
        "chain_b_population": series.chain_b_population,
    })]
    if v["record_distributions"]:
        files.append(write_json(out / "distributions.json", {
            "seed": seed,
            "times_s": series.times,
            "snapshots": [{"m_min": m0, "probabilities": d}
                          for m0, d in zip(series.distribution_m_min, series.distributions)],
        }))
    slope, _, r2 = rotor.fit_slope(series.times, series.mean_lz)
    files.append(write_json(out / "summary.json", {
        "seed": seed, "n_trajectories": n, "slope_hbar_per_s": slope, "fit_r2": r2,
        "rotor_rate_rad_s": state.rotor_rate,
        "pseudo_terminal_m": rotor.pseudo_terminal_m(p.rates().gamma_d, state.rotor_rate),
        "predicted_slope_hbar_per_s": 2 * rates.pair_transfer_rate(p.rates()),
    }))
    files.append(write_plot_data(
        out / "plot" / f"fig2c_mean_lz_gl{v['gamma_l_hz']:g}.dat", series.times, series.mean_lz,
        "Fig. 2c (mean L_z vs time)", "time_s", "mean_lz_hbar",
        [f"gamma_l_hz = {v['gamma_l_hz']!r}", f"n_trajectories = {n}"]))
    return files


def _rates(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    v = p.values
    crystal = p.crystal()
    r = p.rates()
    rep = rates.gamma_sr(r, crystal.eta, crystal.r_min, crystal.r_max, p.constants)
    ss = rates.steady_state(r)
    tau = rates.torque(crystal.eta, crystal.volume, rep.gamma_sr_scaling, ss.delta_n23, p.constants)
    files = [write_json(out / "rate_report.json", {
        "gamma_sr_golden_rule": rep.gamma_sr,
        "gamma_sr_scaling": rep.gamma_sr_scaling,
        "lineshape_factor_s": rep.lineshape_factor,
        "d2sq_avg_rad2_s2": rep.d2sq_avg,
        "gamma_d_from_ensemble": rates.gamma_d_from_ensemble(crystal.eta, crystal.r_min, crystal.r_max, p.constants),
        "populations": {lbl: n for lbl, n in zip(rates.LEVEL_LABELS, ss.populations)},
        "delta_n23": ss.delta_n23,
        "steady_state_residual": ss.residual,
        "torque_nm": tau,
        "torque_per_volume_n_m2": tau / crystal.volume,
        "pair_transfer_rate": rates.pair_transfer_rate(r),
    })]
    grid = np.geomspace(v["gamma_o_min_hz"], v["gamma_o_max_hz"], v["gamma_o_points"])
    gl = p.float_list("gamma_l_list_hz")
    sweep = rates.rate_sweep(r, grid, gl, crystal.eta, crystal.volume, p.constants)
    files.append(write_csv(out / "torque_vs_gamma_o.csv", {
        "gamma_o_hz": sweep["gamma_o"], "gamma_l_hz": sweep["gamma_l"], "gamma_sr": sweep["gamma_sr"],
        "delta_n23": sweep["delta_n23"], "torque_nm": sweep["torque"],
    }))
    for g in gl:
        sel = sweep["gamma_l"] == g
        t = sweep["torque"][sel]
        files.append(write_plot_data(
            out / "plot" / f"figS1b_torque_gl{g:g}.dat", sweep["gamma_o"][sel], t / t.max() if t.max() > 0 else t,
            "Fig. S1b (normalized torque vs optical pumping rate)", "gamma_o_hz", "torque_normalized",
            [f"gamma_l_hz = {g!r}", f"gamma_d_hz = {r.gamma_d!r}"]))
    return files


def _phonon(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    v = p.values
    crystal = p.crystal()
    fld = p.field()
    gd = p.rates().gamma_d
    rep = phonons.channel_report(crystal, gd, fld.b_field, p.constants)
    lam0 = resonant_wavelength(crystal.c_sound, fld.omega0, v["wavelength_convention"])
    files = [write_json(out / "phonon_channel.json", {
        "gamma_sp2_nonres": rep.gamma_sp2_nonres, "gamma_sp2_res": rep.gamma_sp2_res,
        "lambda_factor": rep.lambda_factor, "bose_integral_kT_over_hbar": rep.integral_value,
        "quenched": rep.quenched, "lambda0_m": lam0, "quench_volume_m3": lam0**3,
    })]
    vols = np.geomspace(v["volume_min_m3"], v["volume_max_m3"], v["volume_points"])
    res, nonres, quenched = [], [], []
    for vol in vols:
        inertia = None if crystal.geometry == "sphere" else crystal.moment_of_inertia
        c = replace(crystal, volume=float(vol), moment_of_inertia=inertia)
        g, q = phonons.gamma_sp2_res(c, exact_prefactor=v["exact_prefactor"], b_field=fld.b_field,
                                     wavelength_convention=v["wavelength_convention"], constants=p.constants)
        res.append(g)
        quenched.append(q)
        nonres.append(phonons.gamma_sp2_nonres(c, gd, fld.b_field, p.constants))
    files.append(write_csv(out / "phonon_volume_sweep.csv", {
        "volume_m3": vols, "gamma_res": res, "gamma_nonres": nonres, "quenched": quenched}))
    files.append(write_plot_data(
        out / "plot" / "fig3c_gamma_res_vs_volume.dat", vols, res,
        "Fig. 3c (resonant conversion rate vs crystal volume)", "volume_m3", "gamma_res_per_s",
        [f"quench boundary: volume < lambda0^3 = {lam0**3!r} m^3 (rate set to 0)"]))
    return files


def _oscillator(p: RunParameters) -> design.OscillatorSpec:
    v = p.values
    return design.OscillatorSpec(v["osc_freq_hz"], v["osc_q"], v["osc_inertia_kg_m2"], v["osc_noise_nm"])


def _sweep(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    v = p.values
    lines = design.hyperfine_matching_fields(v["a_par_hz"], v["a_perp_hz"], v["hyperfine_anisotropic"], p.constants)
    lb = [ln.field for ln in lines]
    lo = v["field_min_t"] if v["field_min_t"] is not None else min(lb) - 0.01
    hi = v["field_max_t"] if v["field_max_t"] is not None else max(lb) + 0.01
    grid = np.linspace(lo, hi, v["field_points"])
    spec = design.sweep_spectrum(grid, p.rates(), p.crystal(), _oscillator(p), lines, v["lineshape"], p.constants)
    files = [write_csv(out / "spectrum.csv", {
        "b_tesla": spec.fields, "torque_nm": spec.torque, "amplitude_rad": spec.amplitude, "snr": spec.snr})]
    files.append(write_json(out / "lines.json", [{"b_tesla": b, "label": lbl} for b, lbl in spec.assignments]))
    files.append(write_plot_data(out / "plot" / "figS4c_amplitude_vs_field.dat", spec.fields, spec.amplitude,
                                 "Fig. S4c (oscillator amplitude across a field sweep)", "b_tesla", "amplitude_rad"))
    return files


def _design(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    v = p.values
    rep = design.design_report(p.rates(), p.crystal(), _oscillator(p), v["spot_radius_m"], v["thickness_m"],
                               v["y_sat_w_m2"], v["gamma_o_sat_hz"], p.constants)
    try:
        exact = design.laser_power_exact(p.rates().gamma_o, v["spot_radius_m"], v["y_sat_w_m2"], v["gamma_o_sat_hz"])
    except RotopumpError as exc:
        exact = None
        rep["notes"] = [str(exc)]
    rep["derived"]["laser_power_exact_w"] = exact
    rep["optical_cycle_ledger_hbar"] = {
        f"{pw},{pol}": design.optical_cycle_ledger(pw, pol) for pw in "abcd" for pol in ("LCP", "RCP", "linear")}
    return [write_json(out / "design_report.json", rep)]


def _verify(p: RunParameters, out: Path, seed: int, threads: int) -> list[Path]:
    checks = run_checks(seed % 2**32)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.value:.3e} (tol {c.tolerance:.1e})")
    files = [write_csv(out / "verify.csv", {
        "check": [c.name for c in checks], "value": [c.value for c in checks],
        "tolerance": [c.tolerance for c in checks], "passed": [c.passed for c in checks]})]
    if not all(c.passed for c in checks):
        raise _VerifyFailed(files)
    return files


class _VerifyFailed(RotopumpError):
    exit_code = 1

    def __init__(self, files):
        super().__init__("one or more invariant checks failed")
        self.files = files


_DISPATCH = {"simulate": _simulate, "rates": _rates, "phonon": _phonon, "sweep": _sweep,
             "design": _design, "verify": _verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotopump", description="Spin-to-rotation transfer toolkit.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--params", help="flat key = value parameter file (defaults used when omitted)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, help="64-bit base seed (overrides the 'seed' key)")
    ap.add_argument("--threads", type=int, help="worker processes (default: ROTOPUMP_THREADS or CPU count)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a parameter")
    return ap


def execute(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    out = Path(args.out)
    try:
        overrides = [parse_override(s) for s in args.set]
        if args.params:
            params = load_run_parameters(args.params, overrides)
        else:
            params = RunParameters.from_mapping({}).with_overrides(overrides)
        seed = args.seed if args.seed is not None else params["seed"]
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        params = params.with_overrides([("seed", str(seed))])
        threads = resolve_threads(args.threads)
        status = 0
        try:
            files = _DISPATCH[args.command](params, out, seed, threads)
        except _VerifyFailed as exc:
            files, status = exc.files, exc.exit_code
        write_manifest(out, args.command, params, seed, threads, time.perf_counter() - t0, files, args.params)
        return status
    except RotopumpError as exc:
        print(f"rotopump {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
