"""Acceptance criteria 1-11, one test each, each printing a PASS/FAIL line."""

import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import linalg

from rotopump import phonons, rates, rotor
from rotopump.cli import execute
from rotopump.config import load_run_parameters
from rotopump.design import laser_power, spot_volume
from rotopump.params import DEFAULT_CONSTANTS, RateSet, matching_field, moment_from_rotor_rate, resonant_wavelength
from rotopump.verify import check_ladder, check_shift_identities, check_total_momentum, check_two_pair

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rotor_setup(name):
    p = load_run_parameters(CONFIGS / name)
    v = p.values
    inertia = p.moment_of_inertia()
    state = rotor.thermal_initial_state(rotor.t_init_for_width(v["sigma_m"], inertia), inertia)
    cfg = rotor.TrajectoryConfig(dt=v["dt_s"], t_total=v["t_total_s"], seed=v["seed"], rates=p.rates(),
                                 snapshot_stride=v["snapshot_stride"], hop_factor=v["hop_factor"],
                                 record_distributions=False)
    return p, state, cfg


@pytest.mark.slow
def test_criterion_01_slope_law(criterion):
    p, state, cfg = _rotor_setup("fig2_slope.params")
    gd = p.rates().gamma_d
    slopes, r2s = [], []
    for gl in (0.0, 5e5, 2.5e6):
        c = dataclasses.replace(cfg, rates=cfg.rates.with_(gamma_l=gl))
        s = rotor.run_ensemble(c, state, p["n_trajectories"])
        k = len(s.times) // 10  # skip the initial transient of chain-B filling
        slope, _, r2 = rotor.fit_slope(s.times[k:], s.mean_lz[k:])
        slopes.append(slope)
        r2s.append(r2)
    expected = [math.hypot(gd, gl) / gd for gl in (5e5, 2.5e6)]
    measured = [slopes[0] / slopes[1], slopes[0] / slopes[2]]
    errs = [abs(m / e - 1) for m, e in zip(measured, expected)]
    ok = max(errs) <= 0.25 and min(r2s) > 0.95
    criterion(1, ok, f"slope ratios {measured[0]:.3f} (law {expected[0]:.3f}), {measured[1]:.3f} "
                     f"(law {expected[1]:.3f}); max rel err {max(errs):.1%}; min R^2 {min(r2s):.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_02_plateau_and_field_shift(criterion):
    p, state, cfg = _rotor_setup("fig2_plateau.params")
    w = state.rotor_rate
    gd = p.rates().gamma_d
    s = rotor.run_ensemble(cfg, state, p["n_trajectories"], keep_final_states=True)
    est = rotor.pseudo_terminal_analysis(s, gd, w)
    # the stall sets in once the energy step 2 (m+1) hbar^2 / J passes 2 pi hbar gamma_d
    step_at_end = rotor.field_shift_detuning(est.final_mean, w)
    past_threshold = abs(step_at_end) > 2 * math.pi * gd
    shifted = []
    for f in s.final_states:
        f = f.copy()
        f.detuning = step_at_end
        shifted.append(f)
    cont = dataclasses.replace(cfg, t_total=2e-5, seed=cfg.seed + 1)
    s2 = rotor.run_ensemble(cont, shifted, p["n_trajectories"])
    restored = rotor.fit_slope(s2.times, s2.mean_lz)[0] / est.initial_slope
    ok = est.slope_ratio < 0.1 and past_threshold and restored >= 0.7
    criterion(2, ok, f"m* = {est.m_star:.1f}, plateau <m> = {est.final_mean:.1f}, final/initial slope "
                     f"{est.slope_ratio:.3f} (< 0.1), after field shift {restored:.2f} of initial (>= 0.7)")
    assert ok


def test_criterion_03_bose_integral_anchor(criterion):
    value = phonons.bose_integral_nu(2.36e-4, 2.6e-8)
    # the same integral from the physical inputs at the matching field
    physical = phonons.bose_integral(293.0, DEFAULT_CONSTANTS.gamma_e * matching_field(), 1e6)
    ok = abs(value / 1.4e19 - 1) <= 0.1
    criterion(3, ok, f"integral = {value:.4g} (physical inputs {physical:.4g}) vs anchor 1.4e19 +- 10%")
    assert ok


def test_criterion_04_quadrature_anchors(criterion):
    d = phonons.theta_r_integrals()
    ea = abs(d["I_a"] / (30 * math.pi) - 1)
    eb = abs(d["I_b"] / (376 * math.pi) - 1)
    rng = np.random.default_rng(2024)
    v = rng.normal(size=(1_000_000, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    worst = 0.0
    for theta in np.linspace(0.1, 3.0, 6):
        rhat = np.array([math.sin(theta), 0.0, math.cos(theta)])
        mc = 4 * math.pi * np.mean((v @ rhat) ** 4)
        worst = max(worst, abs(mc / phonons.angular_integral_k4(theta) - 1))
    ok = ea <= 0.02 and eb <= 0.02 and worst <= 0.005
    criterion(4, ok, f"I_a/30pi - 1 = {ea:.2%}, I_b/376pi - 1 = {eb:.2%}, k^4 vs MC worst {worst:.3%}")
    assert ok


def test_criterion_05_three_level_oracle(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        g = complex(*rng.normal(size=2)) * 10 ** rng.uniform(-1, 1)
        t = rng.uniform(0, 10)
        psi = linalg.expm(-1j * phonons.three_level_hamiltonian(g) * t)[:, 0]
        worst = max(worst, abs(abs(psi[2]) ** 2 - phonons.three_level_transfer(g, t, hbar=1.0)))
    g = 0.37
    pmax = float(phonons.three_level_transfer(g, math.pi / (math.sqrt(5) * g), hbar=1.0))
    ok = worst < 1e-10 and abs(pmax - 16 / 25) < 1e-15
    criterion(5, ok, f"closed form vs expm worst {worst:.2e}; maximum {pmax!r} vs 16/25")
    assert ok


def test_criterion_06_resonant_rate(criterion):
    p = load_run_parameters(CONFIGS / "phonon.params")
    crystal = p.crystal()
    v = p.values
    lam3 = resonant_wavelength(crystal.c_sound, DEFAULT_CONSTANTS.gamma_e * matching_field(), "hz") ** 3
    vols = np.geomspace(v["volume_min_m3"], v["volume_max_m3"], v["volume_points"])
    rates_v, quench_ok = [], True
    for vol in vols:
        g, q = phonons.gamma_sp2_res(dataclasses.replace(crystal, volume=float(vol), moment_of_inertia=None))
        rates_v.append(g)
        quench_ok &= (q == (vol < lam3)) and (not q or g == 0.0)
    rates_v = np.array(rates_v)
    live = np.flatnonzero(rates_v > 0)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        i, j = rng.choice(live, 2, replace=False)
        worst = max(worst, abs((rates_v[i] / rates_v[j]) / math.sqrt(vols[j] / vols[i]) - 1))
    ok = rates_v.max() <= 0.1 and worst < 1e-6 and quench_ok and len(live) < len(vols)
    criterion(6, ok, f"max rate {rates_v.max():.3g} 1/s (<= 0.1), V^-1/2 worst {worst:.1e}, "
                     f"quenched below {lam3:.3g} m^3: {quench_ok}")
    assert ok


def test_criterion_07_torque_anchors(criterion):
    p = load_run_parameters(CONFIGS / "torque.params")
    v = p.values
    crystal = p.crystal()
    per_v = {}
    for gl in p.float_list("gamma_l_list_hz"):
        r = p.rates().with_(gamma_l=gl)
        ss = rates.steady_state(r)
        per_v[gl] = rates.torque(crystal.eta, 1.0, rates.gamma_sr_scaling(r), ss.delta_n23)
    vol = spot_volume(v["spot_radius_m"], v["thickness_m"])
    tau = per_v[v["gamma_l_hz"]] * vol
    power = laser_power(v["gamma_o_hz"], v["spot_radius_m"], v["y_sat_w_m2"], v["gamma_o_sat_hz"])
    within2 = {gl: 0.5 <= t / 2e-5 <= 2 for gl, t in per_v.items()}
    ok_tau_v = all(within2.values())
    ok_tau = 1 / 3 <= tau / 1e-17 <= 3
    ok_power = abs(power / 0.780 - 1) <= 0.01
    ok = ok_tau_v and ok_tau and ok_power
    tv = ", ".join(f"{t:.3g} (GL={gl:g})" for gl, t in per_v.items())
    criterion(7, ok, f"tau/V = {tv} vs 2e-5 x/ 2 -> {ok_tau_v}; tau = {tau:.3g} N m vs 1e-17 x/ 3 -> {ok_tau}; "
                     f"P = {power * 1e3:.1f} mW vs 780 +- 1% -> {ok_power}")
    assert ok


def test_criterion_08_operator_invariants(criterion):
    checks = [check_total_momentum(s) for s in range(5)] + [check_ladder()]
    checks += check_shift_identities()
    for s in range(5):
        checks += check_two_pair(s)
    failed = [c.name for c in checks if not c.passed]
    ok = not failed
    worst = max(checks, key=lambda c: c.value / c.tolerance if c.tolerance else (0 if c.value == 0 else math.inf))
    criterion(8, ok, f"{len(checks)} checks, {len(failed)} failed; largest relative to tolerance: "
                     f"{worst.name} = {worst.value:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_09_monte_carlo_vs_analytic(criterion):
    gd = 5e5
    inertia = moment_from_rotor_rate(1e-2)  # nearly free rotor: no energy-step detuning
    state = rotor.thermal_initial_state(0.0, inertia)
    worst, cells = 0.0, []
    for fo in (0.1, 0.25, 0.5):
        for fl in (0.0, 0.5, 1.0):
            r = RateSet(gamma_d=gd, gamma_o=fo * gd, gamma_l=fl * gd)
            cfg = rotor.TrajectoryConfig(dt=5e-8, t_total=2e-3, seed=7, rates=r, snapshot_stride=400,
                                         record_distributions=False)
            s = rotor.run_ensemble(cfg, state, 40)
            k = len(s.times) // 5
            # each transfer event moves the rotor by 2 hbar
            per_pair = rotor.fit_slope(s.times[k:], s.mean_lz[k:])[0] / 2
            ratio = per_pair / rates.pair_transfer_rate(r)
            cells.append(ratio)
            worst = max(worst, abs(ratio - 1))
    ok = worst <= 0.3
    criterion(9, ok, f"MC / analytic over 3x3 grid: {', '.join(f'{c:.2f}' for c in cells)}; worst {worst:.1%}")
    assert ok


def test_criterion_10_steady_state(criterion):
    rng = np.random.default_rng(10)
    worst_rel, worst_abs, worst_rescale, sums_ok = 0.0, 0.0, 0.0, True
    for _ in range(300):
        r = RateSet(gamma_d=10 ** rng.uniform(2, 8), gamma_o=10 ** rng.uniform(0, 8), gamma_l=10 ** rng.uniform(0, 8),
                    gamma_nv=10 ** rng.uniform(0, 5), gamma_p1=10 ** rng.uniform(1, 8))
        ss = rates.steady_state(r)
        g = ss.rate_matrix
        scale = np.abs(g).max()
        worst_rel = max(worst_rel, np.linalg.norm((g / scale) @ ss.populations))
        worst_abs = max(worst_abs, np.linalg.norm(g @ ss.populations))
        sums_ok &= abs(ss.populations.sum() - 1) < 1e-10 and ss.populations.min() >= 0
        c = 10 ** rng.uniform(-6, 6)
        worst_rescale = max(worst_rescale, np.abs(rates.steady_state(matrix=c * g).populations - ss.populations).max())
    grid = np.geomspace(1e3, 1e9, 121)
    curve = rates.pumping_curve(RateSet(gamma_d=1e6, gamma_nv=1e3), grid, 1e24, 1e-12)
    k = int(curve.argmax())
    interior = 0 < k < len(grid) - 1 and curve[k] > curve[0] and curve[k] > curve[-1]
    ok = worst_rel < 1e-10 and sums_ok and interior and worst_rescale < 1e-10
    criterion(10, ok, f"|G n| / max|G| worst {worst_rel:.1e} (absolute in 1/s {worst_abs:.1e}); sum/positivity "
                      f"{sums_ok}; torque peak at interior Gamma_o = {grid[k]:.3g} Hz: {interior}; "
                      f"rescaling worst {worst_rescale:.1e}")
    assert ok


def test_criterion_11_determinism(tmp_path, criterion):
    sim = tmp_path / "sim.params"
    sim.write_text("gamma_d_hz = 5e5\ngamma_o_hz = 1e6\ngamma_l_hz = 5e5\nrotor_rate_rad_s = 10\nsigma_m = 3\n"
                   "dt_s = 2e-9\nt_total_s = 6e-6\nsnapshot_stride = 100\nn_trajectories = 6\n")
    runs = {"simulate": ["--params", str(sim)], "rates": ["--set", "gamma_o_points=21"],
            "phonon": ["--set", "volume_points=11"], "sweep": ["--set", "field_points=801"],
            "design": [], "verify": []}
    mismatched, compared = [], 0
    for command, extra in runs.items():
        outs = []
        for threads in (1, 3, 1):
            out = tmp_path / f"{command}_{len(outs)}"
            assert execute([command, "--out", str(out), "--seed", "99", "--threads", str(threads), *extra]) == 0
            outs.append(out)
        for f in sorted(outs[0].glob("*.csv")) + sorted(outs[0].glob("*.json")):
            if f.name == "manifest.json":
                continue  # wall time and thread count legitimately differ
            compared += 1
            if any((o / f.name).read_bytes() != f.read_bytes() for o in outs[1:]):
                mismatched.append(f"{command}/{f.name}")
    ok = not mismatched and compared > 0
    criterion(11, ok, f"{compared} artifacts compared across threads 1/3/1; mismatches: {mismatched or 'none'}")
    assert ok
