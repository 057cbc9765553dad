"""Golden-rule spin-rotation rate, six-level steady state and torque.

Level labels for the NV-P1 pair, written |m_S, m_I>:

    1 = |+1,+1/2>   2 = |0,+1/2>    3 = |-1,-1/2>
    4 = |-1,+1/2>   5 = |0,-1/2>    6 = |+1,-1/2>

Levels 2 and 3 are degenerate at the matching field and are exchanged by the
double-flip term at rate Gamma_d. Optical pumping drives m_S = +-1 -> 0 at
fixed m_I, NV and P1 relaxation connect levels bidirectionally (infinite
temperature). The generator convention is ``G[j, i]`` = rate from i to j, so
columns sum to zero and dn/dt = G n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNetworkError, InvalidParameterError
from .params import DEFAULT_CONSTANTS, PhysicalConstants, RateSet, alpha_omega

__all__ = [
    "LEVEL_LABELS",
    "SteadyStateReport",
    "RateReport",
    "d2sq_average",
    "gamma_d_from_ensemble",
    "lineshape_factor",
    "gamma_sr",
    "gamma_sr_scaling",
    "rate_matrix",
    "steady_state",
    "torque",
    "pumping_curve",
    "two_chain_polarization",
    "pair_transfer_rate",
    "rate_sweep",
]

LEVEL_LABELS = ("|+1,+1/2>", "|0,+1/2>", "|-1,-1/2>", "|-1,+1/2>", "|0,-1/2>", "|+1,-1/2>")

# (from, to) pairs, zero-based
_PUMP_EDGES = ((0, 1), (3, 1), (2, 4), (5, 4))
_DIPOLAR_EDGES = ((1, 2),)
_NV_EDGES = ((0, 1), (1, 3), (5, 4), (4, 2))
_P1_EDGES = ((0, 5), (1, 4), (3, 2))


@dataclass(frozen=True)
class SteadyStateReport:
    populations: np.ndarray
    delta_n23: float
    converged: bool
    rate_matrix: np.ndarray
    residual: float


@dataclass(frozen=True)
class RateReport:
    gamma_sr: float
    gamma_sr_scaling: float
    lineshape_factor: float
    d2sq_avg: float
    torque: float | None = None
    zero_rates: bool = False


def d2sq_average(eta: float, r_min: float, r_max: float,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Ensemble mean of |d2|^2 in (rad/s)^2 for uniformly placed partners."""
    if not r_min < r_max:
        raise InvalidParameterError("r_min must be below r_max")
    a = alpha_omega(constants)
    return 2 * math.pi / 5 * eta * a**2 * (1 / r_min**3 - 1 / r_max**3)


def gamma_d_from_ensemble(eta: float, r_min: float, r_max: float,
                          constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """RMS double-flip coupling over 2 pi, s^-1."""
    return math.sqrt(d2sq_average(eta, r_min, r_max, constants)) / (2 * math.pi)


def lineshape_factor(rates: RateSet) -> float:
    """rho_ss in seconds; tends to 1/Gamma_d when pumping and dephasing vanish."""
    gd, go, gl = rates.gamma_d, rates.gamma_o, rates.gamma_l
    if gd == 0:
        return 0.0
    return gd / (math.hypot(gd, gl) * math.hypot(gd, go))


def gamma_sr_scaling(rates: RateSet) -> float:
    """Per-pair transfer rate Gamma_d^3 / (sqrt(Gd^2+GL^2) sqrt(Gd^2+Go^2))."""
    return rates.gamma_d**2 * lineshape_factor(rates)


def gamma_sr(rates: RateSet, eta: float, r_min: float, r_max: float,
             constants: PhysicalConstants = DEFAULT_CONSTANTS) -> RateReport:
    """Golden-rule rate 2 pi <|d2|^2> rho_ss plus the per-pair scaling form.

    The golden-rule prefactor (4 pi^2 / 5 hbar^2) eta alpha_E^2 (...) equals
    2 pi times :func:`d2sq_average` in the alpha_omega convention.
    """
    d2sq = d2sq_average(eta, r_min, r_max, constants)
    zero = rates.gamma_d == 0
    rho = lineshape_factor(rates)
    return RateReport(
        gamma_sr=2 * math.pi * d2sq * rho,
        gamma_sr_scaling=gamma_sr_scaling(rates),
        lineshape_factor=rho,
        d2sq_avg=d2sq,
        zero_rates=zero,
    )


def rate_matrix(rates: RateSet) -> np.ndarray:
    g = np.zeros((6, 6))

    def add(i, j, k):
        g[j, i] += k

    for i, j in _PUMP_EDGES:
        add(i, j, rates.gamma_o)
    for i, j in _DIPOLAR_EDGES:
        add(i, j, rates.gamma_d)
        add(j, i, rates.gamma_d)
    for i, j in _NV_EDGES:
        add(i, j, rates.gamma_nv)
        add(j, i, rates.gamma_nv)
    for i, j in _P1_EDGES:
        add(i, j, rates.gamma_p1)
        add(j, i, rates.gamma_p1)
    g -= np.diag(g.sum(axis=0))
    return g


def steady_state(rates: RateSet | None = None, matrix: np.ndarray | None = None,
                 rank_tol: float = 1e-12) -> SteadyStateReport:
    """Null vector of the rate matrix normalized to unit total population.

    ``matrix`` overrides the built-in topology (diagonal is recomputed so the
    columns sum to zero).
    """
    if matrix is None:
        if rates is None:
            raise InvalidParameterError("need rates or an explicit matrix")
        g = rate_matrix(rates)
    else:
        g = np.array(matrix, dtype=float)
        if g.shape != (6, 6) or np.any(g - np.diag(np.diag(g)) < 0):
            raise InvalidParameterError("override must be 6x6 with non-negative off-diagonal rates")
        g = g - np.diag(np.diag(g))
        g -= np.diag(g.sum(axis=0))
    scale = np.abs(g).max()
    if scale == 0:
        raise DegenerateNetworkError("all rates vanish")
    s = np.linalg.svd(g / scale, compute_uv=False)
    if s[-2] < rank_tol:
        raise DegenerateNetworkError(f"rate matrix has nullity > 1 (singular values {s[-3:]})")
    n = _gth_stationary(g / scale)
    residual = float(np.linalg.norm(g @ n) / scale)
    converged = residual < 1e-10 and abs(n.sum() - 1) < 1e-10 and n.min() >= -1e-12
    return SteadyStateReport(n, float(n[1] - n[2]), converged, g, residual)


def _gth_stationary(g: np.ndarray) -> np.ndarray:
    """Stationary vector by Grassmann-Taksar-Heyman state reduction.

    Uses only additions, multiplications and divisions of non-negative
    numbers, so every component is accurate to a few ulps regardless of how
    many decades the rates span.
    """
    a = np.array(g.T, dtype=float)  # a[i, j] = rate i -> j
    np.fill_diagonal(a, 0.0)
    size = a.shape[0]
    for k in range(size - 1, 0, -1):
        out = a[k, :k].sum()
        if out <= 0:
            raise DegenerateNetworkError("state reduction met a state with no outflow")
        a[:k, k] /= out
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    x = np.zeros(size)
    x[0] = 1.0
    for k in range(1, size):
        x[k] = x[:k] @ a[:k, k]
    return x / x.sum()


def torque(eta: float, volume: float, gamma_sr: float, delta_n23: float,
           constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """tau = 2 hbar eta V Gamma_sr (n2 - n3), N m."""
    return 2 * constants.hbar * eta * volume * gamma_sr * delta_n23


def pumping_curve(rates: RateSet, gamma_o_grid, eta: float, volume: float,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Torque against optical pumping rate, using the per-pair transfer rate."""
    out = np.empty(len(gamma_o_grid))
    for k, go in enumerate(gamma_o_grid):
        r = rates.with_(gamma_o=float(go))
        ss = steady_state(r)
        out[k] = torque(eta, volume, gamma_sr_scaling(r), ss.delta_n23, constants)
    return out


def two_chain_polarization(rates: RateSet) -> float:
    """n_A - n_B for the two-chain reduction (symmetric exchange, one-way reset)."""
    gsr = gamma_sr_scaling(rates)
    if gsr == 0 and rates.gamma_o == 0:
        return 0.0
    return rates.gamma_o / (2 * gsr + rates.gamma_o)


def pair_transfer_rate(rates: RateSet) -> float:
    """Double flips per second per pair in the two-chain reduction.

    Each double flip hands 2 hbar to the rotor, so the mean angular momentum
    grows at ``2 * pair_transfer_rate`` hbar per second.
    """
    return gamma_sr_scaling(rates) * two_chain_polarization(rates)


def rate_sweep(rates: RateSet, gamma_o_grid, gamma_l_grid, eta: float, volume: float,
               constants: PhysicalConstants = DEFAULT_CONSTANTS) -> dict:
    rows = {k: [] for k in ("gamma_o", "gamma_l", "gamma_sr", "delta_n23", "torque")}
    for gl in gamma_l_grid:
        for go in gamma_o_grid:
            r = rates.with_(gamma_o=float(go), gamma_l=float(gl))
            ss = steady_state(r)
            gsr = gamma_sr_scaling(r)
            rows["gamma_o"].append(float(go))
            rows["gamma_l"].append(float(gl))
            rows["gamma_sr"].append(gsr)
            rows["delta_n23"].append(ss.delta_n23)
            rows["torque"].append(torque(eta, volume, gsr, ss.delta_n23, constants))
    return {k: np.asarray(v) for k, v in rows.items()}
