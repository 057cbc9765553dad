"""Measurable predictions: field-sweep torque spectra, oscillator response, laser budget."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import InvalidParameterError, NoSolutionError
from .params import DEFAULT_CONSTANTS, CrystalSpec, PhysicalConstants, RateSet
from .rates import gamma_sr_scaling, steady_state, torque

__all__ = [
    "P1_A_PAR",
    "P1_A_PERP",
    "OscillatorSpec",
    "OscillatorResponse",
    "HyperfineLine",
    "SweepSpectrum",
    "hyperfine_matching_fields",
    "detuning_lineshape",
    "zero_detuning_torque",
    "sweep_spectrum",
    "oscillator_response",
    "laser_power",
    "laser_power_exact",
    "pumping_rate_exact",
    "spot_volume",
    "optical_cycle_ledger",
    "design_report",
]

P1_A_PAR = 114e6  # Hz
P1_A_PERP = 81.3e6  # Hz
_COS_TETRAHEDRAL = -1.0 / 3.0


@dataclass(frozen=True)
class OscillatorSpec:
    resonance_freq: float
    quality_factor: float
    osc_moment_of_inertia: float
    torque_noise_floor: float

    def __post_init__(self):
        for name in ("resonance_freq", "osc_moment_of_inertia", "torque_noise_floor"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not self.quality_factor >= 1:
            raise InvalidParameterError("quality_factor must be at least 1")


@dataclass(frozen=True)
class OscillatorResponse:
    amplitude: float
    snr: float


@dataclass(frozen=True)
class HyperfineLine:
    field: float
    m_n: int
    orientation: int = 0

    @property
    def label(self) -> str:
        return f"mN={self.m_n:+d}" + (f",site{self.orientation}" if self.orientation else "")


@dataclass
class SweepSpectrum:
    fields: np.ndarray
    torque: np.ndarray
    amplitude: np.ndarray
    snr: np.ndarray
    lines: list = field(default_factory=list)

    @property
    def assignments(self) -> list[tuple[float, str]]:
        return [(ln.field, ln.label) for ln in self.lines]

    def peak_fields(self) -> np.ndarray:
        """Grid fields at local torque maxima."""
        t = self.torque
        idx = [i for i in range(1, len(t) - 1) if t[i] >= t[i - 1] and t[i] > t[i + 1]]
        return self.fields[idx]


def _orientation_couplings(a_par: float, a_perp: float, anisotropic: bool) -> list[float]:
    if not anisotropic:
        return [a_par]
    # one P1 axis along the field ([111]), three at the tetrahedral angle
    c2 = _COS_TETRAHEDRAL**2
    tilted = math.sqrt(a_par**2 * c2 + a_perp**2 * (1 - c2))
    return [a_par, tilted, tilted, tilted]


def hyperfine_matching_fields(a_par: float = P1_A_PAR, a_perp: float = P1_A_PERP, anisotropic: bool = False,
                              constants: PhysicalConstants = DEFAULT_CONSTANTS) -> list[HyperfineLine]:
    """Fields where 2 omega0 + 2 pi m_N A equals the NV splitting, one per 14N projection.

    With ``anisotropic`` the four P1 orientations in a [111] field each give
    three lines with A(theta)^2 = A_par^2 cos^2 + A_perp^2 sin^2.
    """
    if a_par < 0 or a_perp < 0:
        raise InvalidParameterError("hyperfine couplings must be non-negative")
    lines = []
    for site, a in enumerate(_orientation_couplings(a_par, a_perp, anisotropic)):
        if a == 0:
            lines.append(HyperfineLine(constants.Delta / (2 * constants.gamma_e), 0, site))
            continue
        for m_n in (-1, 0, 1):
            b = (constants.Delta - 2 * math.pi * m_n * a) / (2 * constants.gamma_e)
            lines.append(HyperfineLine(b, m_n, site))
    # collapse coincident lines (the m_N = 0 line is shared by every orientation)
    unique: dict[tuple, HyperfineLine] = {}
    for ln in lines:
        unique.setdefault((round(ln.field, 15), ln.m_n), ln)
    return sorted(unique.values(), key=lambda ln: ln.field)


def detuning_lineshape(detuning, rates: RateSet, shape: str = "lorentzian"):
    """Relative transfer strength at angular detuning (rad/s); 1 at zero detuning."""
    w = 2 * math.pi * math.hypot(rates.gamma_d, rates.gamma_l)
    x = np.asarray(detuning, dtype=float) / w
    if shape == "lorentzian":
        return 1.0 / (1.0 + x * x)
    if shape == "gaussian":
        return np.exp(-0.5 * x * x)
    raise InvalidParameterError(f"unknown lineshape {shape!r}")


def zero_detuning_torque(rates: RateSet, crystal: CrystalSpec,
                         constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    ss = steady_state(rates)
    return torque(crystal.eta, crystal.volume, gamma_sr_scaling(rates), ss.delta_n23, constants)


def sweep_spectrum(fields: Sequence[float], rates: RateSet | Callable[[float], RateSet], crystal: CrystalSpec,
                   oscillator: OscillatorSpec, lines: list[HyperfineLine] | None = None,
                   shape: str = "lorentzian", constants: PhysicalConstants = DEFAULT_CONSTANTS) -> SweepSpectrum:
    """Torque and oscillator amplitude across a field sweep.

    Each hyperfine line is a full-strength resonance; its lineshape multiplies
    the transfer rate while the pumped population difference is taken from the
    zero-detuning steady state.
    """
    b = np.asarray(fields, dtype=float)
    if lines is None:
        lines = hyperfine_matching_fields(constants=constants)
    line_b = np.array([ln.field for ln in lines])
    if b.min() > line_b.min() or b.max() < line_b.max():
        raise InvalidParameterError("field grid does not cover every hyperfine line")
    tq = np.empty_like(b)
    cache: dict = {}
    for k, bk in enumerate(b):
        r = rates(bk) if callable(rates) else rates
        if r not in cache:
            cache[r] = zero_detuning_torque(r, crystal, constants)
        det = 2 * constants.gamma_e * (line_b - bk)
        tq[k] = cache[r] * float(np.sum(detuning_lineshape(det, r, shape)))
    tq = np.maximum(tq, 0.0)
    resp = [oscillator_response(t, oscillator) for t in tq]
    return SweepSpectrum(b, tq, np.array([r.amplitude for r in resp]), np.array([r.snr for r in resp]), list(lines))


def oscillator_response(torque_amplitude: float, oscillator: OscillatorSpec) -> OscillatorResponse:
    """Steady angular amplitude of a torsional oscillator driven on resonance."""
    if torque_amplitude < 0:
        raise InvalidParameterError("torque amplitude must be non-negative")
    w = 2 * math.pi * oscillator.resonance_freq
    theta = oscillator.quality_factor * torque_amplitude / (oscillator.osc_moment_of_inertia * w * w)
    return OscillatorResponse(theta, torque_amplitude / oscillator.torque_noise_floor)


def laser_power(gamma_o: float, spot_radius: float, y_sat: float, gamma_o_sat: float) -> float:
    """Linear-regime power pi zeta^2 Y_sat Gamma_o / Gamma_o_sat, W (y_sat in W/m^2)."""
    if not (spot_radius > 0 and y_sat > 0 and gamma_o_sat > 0):
        raise InvalidParameterError("spot radius, saturation intensity and rate must be positive")
    if not 0 <= gamma_o <= gamma_o_sat:
        raise InvalidParameterError("gamma_o must lie in [0, gamma_o_sat]")
    return math.pi * spot_radius**2 * y_sat * gamma_o / gamma_o_sat


def pumping_rate_exact(intensity: float, y_sat: float, gamma_o_sat: float) -> float:
    return gamma_o_sat * -math.expm1(-intensity / y_sat)


def laser_power_exact(gamma_o: float, spot_radius: float, y_sat: float, gamma_o_sat: float) -> float:
    """Invert Gamma_o = Gamma_sat (1 - exp(-Y / Y_sat)) for the intensity numerically."""
    if not (spot_radius > 0 and y_sat > 0 and gamma_o_sat > 0):
        raise InvalidParameterError("spot radius, saturation intensity and rate must be positive")
    if gamma_o < 0:
        raise InvalidParameterError("gamma_o must be non-negative")
    if gamma_o >= gamma_o_sat:
        raise NoSolutionError("the saturating form never reaches gamma_o >= gamma_o_sat")
    if gamma_o == 0:
        return 0.0
    f = lambda y: pumping_rate_exact(y, y_sat, gamma_o_sat) - gamma_o  # noqa: E731
    hi = y_sat
    while f(hi) < 0:
        hi *= 2
    y = optimize.brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return math.pi * spot_radius**2 * y


def spot_volume(spot_radius: float, thickness: float) -> float:
    """Illuminated cylinder volume, m^3."""
    if not (spot_radius > 0 and thickness > 0):
        raise InvalidParameterError("spot radius and thickness must be positive")
    return math.pi * spot_radius**2 * thickness


# net phonon angular momentum per optical cycle, hbar units, for LCP
_LEDGER_LCP = {"a": 0, "b": 2, "c": 0, "d": 2}


def optical_cycle_ledger(pathway: str, polarization: str) -> float:
    """Phonon angular momentum deposited by one optical cycle along a decay pathway."""
    key = str(pathway).lower()
    if key not in _LEDGER_LCP:
        raise InvalidParameterError(f"unknown pathway {pathway!r}; expected a, b, c or d")
    pol = str(polarization).upper()
    if pol == "LCP":
        return float(_LEDGER_LCP[key])
    if pol == "RCP":
        return float(-_LEDGER_LCP[key])
    if pol == "LINEAR":
        return 0.5 * (_LEDGER_LCP[key] - _LEDGER_LCP[key])
    raise InvalidParameterError(f"unknown polarization {polarization!r}")


def design_report(rates: RateSet, crystal: CrystalSpec, oscillator: OscillatorSpec, spot_radius: float,
                  thickness: float, y_sat: float, gamma_o_sat: float,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS) -> dict:
    """Composed prediction for an illuminated cylinder plus a feasibility verdict."""
    volume = spot_volume(spot_radius, thickness)
    ss = steady_state(rates)
    gsr = gamma_sr_scaling(rates)
    tau_per_v = torque(crystal.eta, 1.0, gsr, ss.delta_n23, constants)
    tau = tau_per_v * volume
    resp = oscillator_response(tau, oscillator)
    power = laser_power(rates.gamma_o, spot_radius, y_sat, gamma_o_sat)
    return {
        "inputs": {
            "rates": {k: getattr(rates, k) for k in ("gamma_d", "gamma_o", "gamma_l", "gamma_nv", "gamma_p1")},
            "eta_m3": crystal.eta,
            "spot_radius_m": spot_radius,
            "thickness_m": thickness,
            "y_sat_w_m2": y_sat,
            "gamma_o_sat": gamma_o_sat,
            "oscillator": {
                "resonance_freq_hz": oscillator.resonance_freq,
                "quality_factor": oscillator.quality_factor,
                "moment_of_inertia_kg_m2": oscillator.osc_moment_of_inertia,
                "torque_noise_floor_nm": oscillator.torque_noise_floor,
            },
        },
        "derived": {
            "gamma_sr": gsr,
            "delta_n23": ss.delta_n23,
            "torque_per_volume_n_m2": tau_per_v,
            "volume_m3": volume,
            "torque_nm": tau,
            "amplitude_rad": resp.amplitude,
            "snr": resp.snr,
            "laser_power_w": power,
        },
        "feasible": bool(resp.snr >= 1.0),
    }
