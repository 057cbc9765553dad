"""Pseudo-terminal plateau of the rotor and recovery after a compensating field shift.

Usage: python scripts/plateau.py [--threads N] [--out DIR]
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from rotopump import rotor
from rotopump.cli import resolve_threads
from rotopump.config import load_run_parameters
from rotopump.io import write_csv, write_json

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "fig2_plateau.params"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="results/plateau")
    ap.add_argument("--shift-time", type=float, default=2e-5, help="continuation after the field shift, s")
    args = ap.parse_args()
    threads = resolve_threads(args.threads)
    p = load_run_parameters(CONFIG)
    v = p.values
    inertia = p.moment_of_inertia()
    state = rotor.thermal_initial_state(rotor.t_init_for_width(v["sigma_m"], inertia), inertia)
    cfg = rotor.TrajectoryConfig(dt=v["dt_s"], t_total=v["t_total_s"], seed=v["seed"], rates=p.rates(),
                                 snapshot_stride=v["snapshot_stride"], record_distributions=False)
    n = v["n_trajectories"]
    s = rotor.run_ensemble(cfg, state, n, threads, keep_final_states=True)
    est = rotor.pseudo_terminal_analysis(s, p.rates().gamma_d, state.rotor_rate)
    det = rotor.field_shift_detuning(est.final_mean, state.rotor_rate)
    shifted = []
    for f in s.final_states:
        f = f.copy()
        f.detuning = det
        shifted.append(f)
    s2 = rotor.run_ensemble(dataclasses.replace(cfg, t_total=args.shift_time, seed=cfg.seed + 1), shifted, n, threads)
    restored = rotor.fit_slope(s2.times, s2.mean_lz)[0]
    out = Path(args.out)
    write_csv(out / "mean_lz.csv", {
        "t_s": np.concatenate([s.times, s.times[-1] + s2.times[1:]]),
        "mean_lz_hbar": np.concatenate([s.mean_lz, s2.mean_lz[1:]]),
        "field_shifted": [False] * len(s.times) + [True] * (len(s2.times) - 1),
    })
    summary = {"m_star": est.m_star, "plateau_mean": est.final_mean, "initial_slope": est.initial_slope,
               "final_slope": est.final_slope, "slope_ratio": est.slope_ratio, "shift_detuning_rad_s": det,
               "restored_slope": restored, "restored_fraction": restored / est.initial_slope}
    write_json(out / "summary.json", summary)
    for k, val in summary.items():
        print(f"{k:22s} {val:.4g}")


if __name__ == "__main__":
    main()
