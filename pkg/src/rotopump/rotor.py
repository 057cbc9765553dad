"""Two-chain tight-binding rotor with quantum-jump pumping and quantum-drift dephasing.

Chain A holds |0,+1/2> and chain B holds |-1,-1/2>, each over rotor states m.
Site energies are E_m / hbar = w_r m^2 with w_r = hbar / 2J, chain B carries
an extra offset ``detuning`` (Delta - 2 omega0'). The double-flip couples
(A, m) to (B, m + 2) with angular frequency ``g = hop_factor * gamma_d``.

One step of length dt is

1. half-step diagonal phases, exact 2x2 rotation on every block, half-step
   phases (symmetric Trotter splitting);
2. optical pumping as a quantum jump: with probability Gamma_o dt P_B the
   B amplitudes are moved onto A at the same m, otherwise B is damped by
   exp(-Gamma_o dt / 2) and the state renormalized;
3. rotor dephasing as quantum drift: every m column picks up a Gaussian
   phase of variance 2 Gamma_L dt, identical on both chains.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import optimize

from .errors import (
    ConfigError,
    InvalidParameterError,
    NotConvergedError,
    ResourceLimitError,
    StepSizeError,
    WindowTooSmallError,
)
from .params import DEFAULT_CONSTANTS, PhysicalConstants, RateSet, rotor_rate as _rotor_rate

__all__ = [
    "RotorLatticeState",
    "TrajectoryConfig",
    "ObservableSeries",
    "PlateauEstimate",
    "thermal_initial_state",
    "t_init_for_width",
    "max_step_rate",
    "build_propagator_step",
    "dense_generator",
    "quantum_jump",
    "quantum_drift",
    "run_trajectory",
    "derive_seeds",
    "run_ensemble",
    "average_ensemble",
    "fit_slope",
    "pseudo_terminal_m",
    "field_shift_detuning",
    "pseudo_terminal_analysis",
]

_STEP_LIMIT = 0.05


@dataclass
class RotorLatticeState:
    m_min: int
    amplitudes: np.ndarray
    moment_of_inertia: float
    detuning: float = 0.0
    constants: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.ndim != 2 or self.amplitudes.shape[0] != 2:
            raise InvalidParameterError("amplitudes must have shape (2, n_sites)")
        if not self.moment_of_inertia > 0:
            raise InvalidParameterError("moment of inertia must be positive")
        self.m_min = int(self.m_min)

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def m_max(self) -> int:
        return self.m_min + self.n_sites - 1

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    @property
    def rotor_rate(self) -> float:
        return _rotor_rate(self.moment_of_inertia, self.constants)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def m_distribution(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    def chain_b_population(self) -> float:
        return float(np.sum(np.abs(self.amplitudes[1]) ** 2))

    def edge_leakage(self) -> tuple[float, float]:
        p = self.m_distribution()
        return float(p[:2].sum()), float(p[-2:].sum())

    def mean_m(self) -> float:
        return float(self.m_distribution() @ self.m)

    def copy(self) -> "RotorLatticeState":
        return replace(self, amplitudes=self.amplitudes.copy())

    def padded(self, left: int, right: int) -> "RotorLatticeState":
        amps = np.zeros((2, self.n_sites + left + right), dtype=np.complex128)
        amps[:, left:left + self.n_sites] = self.amplitudes
        return replace(self, m_min=self.m_min - left, amplitudes=amps)

    def validate(self, leakage_tol: float = 1e-6):
        if abs(self.norm() - 1) > 1e-9:
            raise InvalidParameterError(f"state not normalized (norm {self.norm()!r})")
        lo, hi = self.edge_leakage()
        if max(lo, hi) > leakage_tol:
            raise WindowTooSmallError("population at the window edge exceeds tolerance")


def t_init_for_width(sigma_m: float, moment_of_inertia: float,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Temperature giving <m^2> = sigma_m^2 by equipartition."""
    return sigma_m**2 * constants.hbar**2 / (moment_of_inertia * constants.k_B)


def thermal_initial_state(t_init: float, moment_of_inertia: float, window: tuple[int, int] | None = None,
                          detuning: float = 0.0,
                          constants: PhysicalConstants = DEFAULT_CONSTANTS) -> RotorLatticeState:
    """Real Gaussian amplitudes on chain A with <L_z^2> = J k_B t_init.

    The Gaussian width is tuned so the discrete second moment is exact.
    """
    if not t_init >= 0:
        raise InvalidParameterError("t_init must be non-negative")
    target = moment_of_inertia * constants.k_B * t_init / constants.hbar**2
    sigma = math.sqrt(target)
    half = int(math.ceil(6 * sigma))
    if window is None:
        window = (-half - 8, half + 8)
    lo, hi = int(window[0]), int(window[1])
    if lo > -half or hi < half or lo > 0 or hi < 0:
        raise WindowTooSmallError(f"window [{lo}, {hi}] narrower than 6 sigma = {6 * sigma:.3g}")
    m = np.arange(lo, hi + 1)
    amps = np.zeros((2, len(m)), dtype=np.complex128)
    if target < 1e-12:
        amps[0, -lo] = 1.0
    else:
        def second_moment(s):
            w = np.exp(-0.5 * (m / s) ** 2)
            return (w @ m**2) / w.sum() - target

        s = optimize.brentq(second_moment, 0.05 * sigma + 1e-3, 3 * sigma + 1.0, xtol=1e-14, rtol=1e-14)
        w = np.exp(-0.25 * (m / s) ** 2)
        amps[0] = w / np.sqrt(np.sum(w**2))
    return RotorLatticeState(lo, amps, moment_of_inertia, detuning, constants)


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float
    t_total: float
    seed: int
    rates: RateSet
    snapshot_stride: int = 100
    hop_factor: float = 1.0
    max_sites: int = 20000
    record_distributions: bool = True
    leakage_tol: float = 1e-6
    check_interval: int = 64

    def __post_init__(self):
        if not (self.dt > 0 and self.t_total > 0):
            raise InvalidParameterError("dt and t_total must be positive")
        if self.snapshot_stride < 1 or self.check_interval < 1:
            raise InvalidParameterError("strides must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must fit in 64 bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))

    @property
    def coupling(self) -> float:
        return self.hop_factor * self.rates.gamma_d


def max_step_rate(state: RotorLatticeState, config: TrajectoryConfig) -> float:
    """Fastest scale entering the step bound, rad/s.

    The rotor energy enters through the energy mismatch inside each coupled
    block, 4 w_r (m + 1) + detuning; a common energy shift only adds a global
    phase and cannot spoil the splitting.
    """
    w = state.rotor_rate
    ends = np.array([state.m_min, state.m_max - 2], dtype=float)
    mismatch = np.abs(4 * w * (ends + 1) + state.detuning).max() if state.n_sites > 2 else 0.0
    r = config.rates
    return max(config.coupling, r.gamma_o, r.gamma_l, mismatch, abs(state.detuning))


def _check_step(state, config):
    rate = max_step_rate(state, config)
    if config.dt * rate >= _STEP_LIMIT:
        raise StepSizeError(f"dt * max rate = {config.dt * rate:.3g} exceeds {_STEP_LIMIT}")


# kernels -----------------------------------------------------------------

@njit(cache=True)
def _unitary_step(amps, phase_a, phase_b, c, s):
    n = amps.shape[1]
    a = amps[0]
    b = amps[1]
    for i in range(n):
        a[i] *= phase_a[i]
        b[i] *= phase_b[i]
    for i in range(n - 2):
        x = a[i]
        y = b[i + 2]
        a[i] = c * x - 1j * s * y
        b[i + 2] = c * y - 1j * s * x
    for i in range(n):
        a[i] *= phase_a[i]
        b[i] *= phase_b[i]


@njit(cache=True)
def _jump(amps, p_fire, u, decay):
    """Returns 1 if a jump fired."""
    n = amps.shape[1]
    pb = 0.0
    for i in range(n):
        pb += amps[1, i].real ** 2 + amps[1, i].imag ** 2
    if u < p_fire * pb:
        norm = 0.0
        for i in range(n):
            amps[0, i] = amps[1, i]
            amps[1, i] = 0.0
            norm += amps[0, i].real ** 2 + amps[0, i].imag ** 2
        scale = 1.0 / math.sqrt(norm)
        for i in range(n):
            amps[0, i] *= scale
        return 1
    if decay != 1.0:
        pa = 1.0 - pb
        scale = 1.0 / math.sqrt(pa + decay * decay * pb)
        for i in range(n):
            amps[0, i] *= scale
            amps[1, i] *= decay * scale
    return 0


@njit(cache=True)
def _drift(amps, xi):
    n = amps.shape[1]
    for i in range(n):
        ph = complex(math.cos(xi[i]), math.sin(xi[i]))
        amps[0, i] *= ph
        amps[1, i] *= ph


@njit(cache=True)
def _advance(amps, phase_a, phase_b, c, s, p_fire, decay, uniforms, xis, use_drift):
    jumps = 0
    for k in range(uniforms.shape[0]):
        _unitary_step(amps, phase_a, phase_b, c, s)
        if p_fire > 0.0:
            jumps += _jump(amps, p_fire, uniforms[k], decay)
        if use_drift:
            _drift(amps, xis[k])
    return jumps


def _half_phases(state: RotorLatticeState, dt: float):
    m = state.m.astype(float)
    e = state.rotor_rate * m * m
    pa = np.exp(-0.5j * dt * e)
    pb = np.exp(-0.5j * dt * (e + state.detuning))
    return pa, pb


def build_propagator_step(state: RotorLatticeState, dt: float, gamma_d: float, hop_factor: float = 1.0,
                          gamma_o: float = 0.0, gamma_l: float = 0.0):
    """Return a function applying one unitary Trotter step in place.

    Raises :class:`StepSizeError` when dt does not resolve the fastest scale.
    """
    cfg = TrajectoryConfig(dt=dt, t_total=dt, seed=0,
                           rates=RateSet(gamma_d=gamma_d, gamma_o=gamma_o, gamma_l=gamma_l), hop_factor=hop_factor)
    _check_step(state, cfg)
    pa, pb = _half_phases(state, dt)
    g = hop_factor * gamma_d
    c, s = math.cos(g * dt), math.sin(g * dt)
    n = state.n_sites

    def step(st: RotorLatticeState) -> RotorLatticeState:
        if st.n_sites != n or st.m_min != state.m_min:
            raise InvalidParameterError("state window differs from the one the step was built for")
        _unitary_step(st.amplitudes, pa, pb, c, s)
        return st

    return step


def dense_generator(m_min: int, m_max: int, rotor_rate: float, detuning: float, coupling: complex) -> np.ndarray:
    """H/hbar on the two chains, A sites first; (B, m+2) <- (A, m) element = coupling."""
    m = np.arange(m_min, m_max + 1).astype(float)
    n = len(m)
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, :n] = np.diag(rotor_rate * m * m)
    h[n:, n:] = np.diag(rotor_rate * m * m + detuning)
    for i in range(n - 2):
        h[n + i + 2, i] = coupling
        h[i, n + i + 2] = np.conj(coupling)
    return h


def quantum_jump(state: RotorLatticeState, gamma_o: float, dt: float, rng: np.random.Generator) -> bool:
    """Apply one pumping step in place; returns whether a jump fired."""
    if dt * gamma_o >= _STEP_LIMIT:
        raise StepSizeError("dt * gamma_o must stay below 0.05")
    if gamma_o == 0:
        return False
    u = rng.random()
    return bool(_jump(state.amplitudes, gamma_o * dt, u, math.exp(-0.5 * gamma_o * dt)))


def quantum_drift(state: RotorLatticeState, gamma_l: float, dt: float, rng: np.random.Generator) -> RotorLatticeState:
    """Random Gaussian phase per m column, variance 2 gamma_l dt."""
    if dt * gamma_l >= _STEP_LIMIT:
        raise StepSizeError("dt * gamma_l must stay below 0.05")
    if gamma_l == 0:
        return state
    xi = rng.normal(0.0, math.sqrt(2 * gamma_l * dt), state.n_sites)
    _drift(state.amplitudes, xi)
    return state


@dataclass
class ObservableSeries:
    times: np.ndarray
    mean_lz: np.ndarray
    lz_second_moment: np.ndarray
    rotational_energy: np.ndarray
    chain_b_population: np.ndarray
    distributions: list = field(default_factory=list)
    distribution_m_min: list = field(default_factory=list)
    seeds: tuple = ()
    jumps: int = 0
    final_state: RotorLatticeState | None = None
    final_states: list = field(default_factory=list)

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(self.lz_second_moment - self.mean_lz**2, 0.0)

    def distribution_at(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        p = self.distributions[k]
        m0 = self.distribution_m_min[k]
        return np.arange(m0, m0 + len(p)), p


def _grow(state: RotorLatticeState, config: TrajectoryConfig) -> RotorLatticeState:
    lo, hi = state.edge_leakage()
    if max(lo, hi) <= config.leakage_tol:
        return state
    extra = max(4, int(math.ceil(0.25 * state.n_sites)))
    new = state.padded(extra if lo > config.leakage_tol else 0, extra if hi > config.leakage_tol else 0)
    if new.n_sites > config.max_sites:
        raise ResourceLimitError(f"rotor window would exceed {config.max_sites} sites")
    _check_step(new, config)
    return new


def run_trajectory(config: TrajectoryConfig, initial_state: RotorLatticeState) -> ObservableSeries:
    """Integrate one stochastic trajectory; deterministic for a given seed."""
    state = initial_state.copy()
    _check_step(state, config)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(config.seed))))
    rates = config.rates
    dt = config.dt
    g = config.coupling
    c, s = math.cos(g * dt), math.sin(g * dt)
    p_fire = rates.gamma_o * dt
    decay = math.exp(-0.5 * rates.gamma_o * dt)
    sig = math.sqrt(2 * rates.gamma_l * dt)
    use_drift = rates.gamma_l > 0
    hbar = state.constants.hbar

    times, mean, second, erot, pb = [], [], [], [], []
    dists, dist_m0 = [], []

    def record(step):
        p = state.m_distribution()
        m = state.m.astype(float)
        times.append(step * dt)
        mean.append(float(p @ m))
        m2 = float(p @ (m * m))
        second.append(m2)
        erot.append(hbar * state.rotor_rate * m2)
        pb.append(float(np.sum(np.abs(state.amplitudes[1]) ** 2)))
        if config.record_distributions:
            dists.append(p.copy())
            dist_m0.append(state.m_min)

    record(0)
    n_steps = config.n_steps
    done = 0
    jumps = 0
    pa, pbh = _half_phases(state, dt)
    empty = np.zeros((0, 0))
    while done < n_steps:
        next_snap = (done // config.snapshot_stride + 1) * config.snapshot_stride
        chunk = min(config.check_interval, next_snap - done, n_steps - done)
        uniforms = rng.random(chunk)
        xis = rng.normal(0.0, sig, (chunk, state.n_sites)) if use_drift else empty
        jumps += _advance(state.amplitudes, pa, pbh, c, s, p_fire, decay, uniforms, xis, use_drift)
        done += chunk
        grown = _grow(state, config)
        if grown is not state:
            state = grown
            pa, pbh = _half_phases(state, dt)
        if done % config.snapshot_stride == 0 or done == n_steps:
            record(done)
    return ObservableSeries(
        times=np.array(times), mean_lz=np.array(mean), lz_second_moment=np.array(second),
        rotational_energy=np.array(erot), chain_b_population=np.array(pb),
        distributions=dists, distribution_m_min=dist_m0, seeds=(int(config.seed),), jumps=jumps,
        final_state=state,
    )


def derive_seeds(base_seed: int, n: int) -> list[int]:
    """Index-based 64-bit seeds; trajectory k always receives the k-th value."""
    ss = np.random.SeedSequence(int(base_seed))
    return [int(x) for x in ss.generate_state(n, dtype=np.uint64)]


def _run_one(args):
    config, state, keep = args
    series = run_trajectory(config, state)
    if not keep:
        series.final_state = None
    return series


def run_ensemble(config: TrajectoryConfig, initial_state, n_trajectories: int,
                 threads: int = 1, keep_final_states: bool = False) -> ObservableSeries:
    """Run ``n_trajectories`` with seeds derived from ``config.seed`` and average them.

    ``initial_state`` is either one state shared by all members or a sequence
    with one state per trajectory (used to continue a previous ensemble).
    """
    if n_trajectories < 2:
        raise ConfigError("an ensemble needs at least two trajectories")
    if isinstance(initial_state, RotorLatticeState):
        states = [initial_state] * n_trajectories
    else:
        states = list(initial_state)
        if len(states) != n_trajectories:
            raise ConfigError("need one initial state per trajectory")
    seeds = derive_seeds(config.seed, n_trajectories)
    jobs = [(replace(config, seed=s), st, keep_final_states) for s, st in zip(seeds, states)]
    if threads <= 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, n_trajectories // (4 * threads))))
    return average_ensemble(results)


def _aligned(dlist, m0list):
    lo = min(m0list)
    hi = max(m0 + len(p) for p, m0 in zip(dlist, m0list))
    out = np.zeros((len(dlist), hi - lo))
    for k, (p, m0) in enumerate(zip(dlist, m0list)):
        out[k, m0 - lo:m0 - lo + len(p)] = p
    return lo, out


def average_ensemble(series: list[ObservableSeries]) -> ObservableSeries:
    """Pointwise mean over trajectories.

    Trajectories are combined in seed order, so the result does not depend on
    the order in which they are passed or finished.
    """
    if len(series) < 2:
        raise ConfigError("an ensemble needs at least two trajectories")
    seeds = [s.seeds for s in series]
    flat = [x for t in seeds for x in t]
    if len(set(flat)) != len(flat):
        raise ConfigError("ensemble members must have distinct seeds")
    grid = series[0].times
    for s in series[1:]:
        if s.times.shape != grid.shape or np.any(s.times != grid):
            raise ConfigError("ensemble members have mismatched time grids")
    order = sorted(range(len(series)), key=lambda k: seeds[k])
    ordered = [series[k] for k in order]

    def mean(attr):
        return np.mean(np.stack([getattr(s, attr) for s in ordered]), axis=0)

    dists, m0s = [], []
    n_snap = min(len(s.distributions) for s in ordered)
    for k in range(n_snap):
        lo, arr = _aligned([s.distributions[k] for s in ordered], [s.distribution_m_min[k] for s in ordered])
        dists.append(arr.mean(axis=0))
        m0s.append(lo)
    return ObservableSeries(
        times=grid.copy(), mean_lz=mean("mean_lz"), lz_second_moment=mean("lz_second_moment"),
        rotational_energy=mean("rotational_energy"), chain_b_population=mean("chain_b_population"),
        distributions=dists, distribution_m_min=m0s, seeds=tuple(x for s in ordered for x in s.seeds),
        jumps=sum(s.jumps for s in ordered),
        final_states=[s.final_state for s in ordered if s.final_state is not None],
    )


def fit_slope(t, y) -> tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, R^2)."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def pseudo_terminal_m(gamma_d: float, rotor_rate: float) -> float:
    """m* where the rotor step 4 w_r (m + 1) reaches 2 pi Gamma_d, i.e. pi Gamma_d J / hbar - 1."""
    return math.pi * gamma_d / (2 * rotor_rate) - 1


def field_shift_detuning(m: float, rotor_rate: float) -> float:
    """Chain-B offset that puts the (m, m+2) block back on resonance."""
    return -4 * rotor_rate * (m + 1)


@dataclass(frozen=True)
class PlateauEstimate:
    m_star: float
    onset_time: float
    initial_slope: float
    final_slope: float
    final_mean: float

    @property
    def slope_ratio(self) -> float:
        return self.final_slope / self.initial_slope

    def stalled(self, threshold: float = 0.1) -> bool:
        return self.slope_ratio < threshold


def pseudo_terminal_analysis(series: ObservableSeries, gamma_d: float, rotor_rate: float,
                             initial_fraction_of_m_star: float = 0.25) -> PlateauEstimate:
    """Compare the growth of <L_z> before and after the rotor step passes 2 pi Gamma_d.

    The initial slope is fitted while <m> has moved less than
    ``initial_fraction_of_m_star * m*`` from its start; the final slope over
    every snapshot with <m> >= m*.
    """
    t, y = series.times, series.mean_lz
    m_star = pseudo_terminal_m(gamma_d, rotor_rate)
    early = np.flatnonzero(y - y[0] < initial_fraction_of_m_star * m_star)
    early = early[early == np.arange(len(early))]
    if len(early) < 3:
        raise NotConvergedError("too few snapshots before the growth bends; use a finer stride")
    s0 = fit_slope(t[early], y[early])[0]
    if not s0 > 0:
        raise NotConvergedError("no initial growth to compare against")
    past = np.flatnonzero(y >= m_star)
    if len(past) < 3:
        raise NotConvergedError(f"<m> did not pass m* = {m_star:.4g} within the horizon")
    onset = past[0]
    s1 = fit_slope(t[onset:], y[onset:])[0]
    return PlateauEstimate(m_star, float(t[onset]), s0, s1, float(y[-1]))
