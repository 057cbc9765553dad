"""Rotor slope versus dephasing rate, compared with the (Gd^2 + GL^2)^(-1/2) law.

Usage: python scripts/slope_law.py [--threads N] [--out DIR]
"""

import argparse
import dataclasses
import math
from pathlib import Path

from rotopump import rotor
from rotopump.cli import resolve_threads
from rotopump.config import load_run_parameters
from rotopump.io import write_csv

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "fig2_slope.params"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="results/slope_law")
    ap.add_argument("--gamma-l", type=float, nargs="+", default=[0.0, 5e5, 2.5e6])
    args = ap.parse_args()
    threads = resolve_threads(args.threads)
    p = load_run_parameters(CONFIG)
    v = p.values
    inertia = p.moment_of_inertia()
    state = rotor.thermal_initial_state(rotor.t_init_for_width(v["sigma_m"], inertia), inertia)
    base = rotor.TrajectoryConfig(dt=v["dt_s"], t_total=v["t_total_s"], seed=v["seed"], rates=p.rates(),
                                  snapshot_stride=v["snapshot_stride"], record_distributions=False)
    gd = p.rates().gamma_d
    rows = {"gamma_l_hz": [], "slope_hbar_per_s": [], "fit_r2": [], "ratio_to_first": [], "law_ratio": []}
    for gl in args.gamma_l:
        cfg = dataclasses.replace(base, rates=base.rates.with_(gamma_l=gl))
        s = rotor.run_ensemble(cfg, state, v["n_trajectories"], threads)
        k = len(s.times) // 10
        slope, _, r2 = rotor.fit_slope(s.times[k:], s.mean_lz[k:])
        rows["gamma_l_hz"].append(gl)
        rows["slope_hbar_per_s"].append(slope)
        rows["fit_r2"].append(r2)
    g0 = args.gamma_l[0]
    for gl, slope in zip(rows["gamma_l_hz"], rows["slope_hbar_per_s"]):
        rows["ratio_to_first"].append(rows["slope_hbar_per_s"][0] / slope)
        rows["law_ratio"].append(math.hypot(gd, gl) / math.hypot(gd, g0))
    out = Path(args.out)
    write_csv(out / "slopes.csv", rows)
    for i, gl in enumerate(rows["gamma_l_hz"]):
        print(f"GL = {gl:9.3g} Hz  slope = {rows['slope_hbar_per_s'][i]:.4g} hbar/s  R^2 = {rows['fit_r2'][i]:.4f}  "
              f"ratio {rows['ratio_to_first'][i]:.3f} (law {rows['law_ratio'][i]:.3f})")


if __name__ == "__main__":
    main()
