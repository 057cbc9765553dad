"""Physical constants, unit conventions and derived parameters.

Unit conventions used throughout the package:

* rates ``gamma_*`` are plain s^-1 (no factor 2 pi);
* frequencies written ``omega*`` are angular, rad/s;
* the dipolar prefactor exists in two flavours: ``alpha_E`` (J m^3, two
  factors of hbar) and ``alpha_omega = alpha_E / hbar`` (rad/s m^3). Every
  formula names the flavour it consumes.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from scipy import constants as _sc

from .errors import ConfigError, InvalidParameterError

__all__ = [
    "PhysicalConstants",
    "CrystalSpec",
    "RateSet",
    "FieldSpec",
    "DEFAULT_CONSTANTS",
    "matching_field",
    "alpha_coupling",
    "alpha_omega",
    "r_max_from_density",
    "ppm_to_density",
    "density_to_ppm",
    "nu0",
    "nu1",
    "resonant_wavelength",
    "rotor_rate",
    "moment_from_rotor_rate",
    "rotor_energy_step",
    "load_param_file",
]

DIAMOND_DENSITY = 3515.0  # kg/m^3
DIAMOND_SOUND_SPEED = 1.2e4  # m/s
DIAMOND_CARBON_DENSITY = 1.76e29  # m^-3


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    k_B: float = _sc.k
    mu0: float = _sc.mu_0
    gamma_e: float = _sc.physical_constants["electron gyromag. ratio"][0]
    Delta: float = 2 * math.pi * 2.87e9
    carbon_number_density: float = DIAMOND_CARBON_DENSITY

    def __post_init__(self):
        for name in ("hbar", "k_B", "mu0", "gamma_e", "carbon_number_density"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.Delta < 0:
            raise InvalidParameterError("Delta must be non-negative")


DEFAULT_CONSTANTS = PhysicalConstants()


def matching_field(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Field (T) at which the NV 0 <-> -1 gap equals twice the Zeeman frequency."""
    return constants.Delta / (2.0 * constants.gamma_e)


def alpha_coupling(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Dipolar prefactor in energy units, J m^3."""
    return constants.mu0 / (4 * math.pi) * constants.gamma_e**2 * constants.hbar**2


def alpha_omega(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Dipolar prefactor in angular-frequency units, rad/s m^3."""
    return alpha_coupling(constants) / constants.hbar


def r_max_from_density(eta: float) -> float:
    """Wigner-Seitz radius (3 / (4 pi eta))^(1/3)."""
    if not eta > 0:
        raise InvalidParameterError(f"pair density must be positive, got {eta!r}")
    return (3.0 / (4.0 * math.pi * eta)) ** (1.0 / 3.0)


def ppm_to_density(ppm: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return ppm * 1e-6 * constants.carbon_number_density


def density_to_ppm(eta: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return eta / (1e-6 * constants.carbon_number_density)


def nu0(temperature: float, b_field: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """hbar omega0 / k_B T with omega0 = gamma_e B in rad/s."""
    return constants.hbar * constants.gamma_e * b_field / (constants.k_B * temperature)


def nu1(temperature: float, gamma_d: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """hbar Gamma_d / k_B T with Gamma_d taken as a plain rate (no 2 pi)."""
    return constants.hbar * gamma_d / (constants.k_B * temperature)


def resonant_wavelength(c_sound: float, omega0: float, convention: str = "hz") -> float:
    """Wavelength of phonons resonant with the Zeeman frequency.

    ``convention="hz"`` uses 2 pi c / f0 with f0 = omega0 / 2 pi, which gives
    roughly 52 um in diamond at the matching field. ``convention="rad"`` uses
    2 pi c / omega0 (roughly 8 um).
    """
    if convention == "hz":
        return 2 * math.pi * c_sound / (omega0 / (2 * math.pi))
    if convention == "rad":
        return 2 * math.pi * c_sound / omega0
    raise InvalidParameterError(f"unknown wavelength convention {convention!r}")


def rotor_rate(moment_of_inertia: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """hbar / (2 J) in rad/s, so that E_m / hbar = rotor_rate * m^2."""
    return constants.hbar / (2.0 * moment_of_inertia)


def moment_from_rotor_rate(rate: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    if not rate > 0:
        raise InvalidParameterError("rotor rate must be positive")
    return constants.hbar / (2.0 * rate)


def rotor_energy_step(m, moment_of_inertia: float, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """E_{m+2} - E_m = 2 (m + 1) hbar^2 / J, in joules."""
    return 2.0 * (m + 1) * constants.hbar**2 / moment_of_inertia


@dataclass(frozen=True)
class RateSet:
    gamma_d: float = 1e6
    gamma_o: float = 1e5
    gamma_l: float = 0.0
    gamma_nv: float = 1e3
    gamma_p1: float | None = None

    def __post_init__(self):
        if self.gamma_p1 is None:
            # P1 spin diffusion is itself dipolar, so it tracks Gamma_d
            object.__setattr__(self, "gamma_p1", self.gamma_d)
        for name in ("gamma_d", "gamma_o", "gamma_l", "gamma_nv", "gamma_p1"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v!r}")

    def with_(self, **kw) -> "RateSet":
        return replace(self, **kw)


def _sphere_inertia(rho: float, volume: float) -> float:
    radius = (3 * volume / (4 * math.pi)) ** (1 / 3)
    return 0.4 * rho * volume * radius**2


@dataclass(frozen=True)
class CrystalSpec:
    """Bulk crystal. ``moment_of_inertia`` defaults to a uniform sphere.

    ``geometry="free"`` skips the inertia consistency check; scaled rotor
    runs use it to set hbar/2J independently of the volume.
    """

    rho: float = DIAMOND_DENSITY
    c_sound: float = DIAMOND_SOUND_SPEED
    volume: float = 1e-12
    temperature: float = 293.0
    eta: float = ppm_to_density(1.0)
    r_min: float = 1e-9
    r_max: float | None = None
    moment_of_inertia: float | None = None
    geometry: str = "sphere"

    def __post_init__(self):
        for name in ("rho", "c_sound", "volume", "temperature", "eta", "r_min"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be positive, got {v!r}")
        if self.r_max is None:
            object.__setattr__(self, "r_max", r_max_from_density(self.eta))
        if not self.r_min < self.r_max:
            raise InvalidParameterError(f"r_min ({self.r_min}) must be below r_max ({self.r_max})")
        if self.geometry == "sphere":
            expected = _sphere_inertia(self.rho, self.volume)
            if self.moment_of_inertia is None:
                object.__setattr__(self, "moment_of_inertia", expected)
            elif abs(self.moment_of_inertia - expected) > 1e-9 * expected:
                raise InvalidParameterError(
                    "moment_of_inertia inconsistent with a uniform sphere of this volume and density"
                )
        elif self.geometry == "free":
            if self.moment_of_inertia is None or not self.moment_of_inertia > 0:
                raise InvalidParameterError("geometry 'free' needs a positive moment_of_inertia")
        else:
            raise InvalidParameterError(f"unknown geometry {self.geometry!r}")

    @property
    def mass(self) -> float:
        return self.rho * self.volume


@dataclass(frozen=True)
class FieldSpec:
    b_field: float
    constants: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    @property
    def omega0(self) -> float:
        return self.constants.gamma_e * self.b_field

    @property
    def detuning(self) -> float:
        """Delta - 2 omega0, rad/s. Zero at the matching field."""
        return self.constants.Delta - 2.0 * self.omega0

    @classmethod
    def matched(cls, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> "FieldSpec":
        return cls(matching_field(constants), constants)

    @classmethod
    def from_detuning(cls, detuning: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> "FieldSpec":
        return cls((constants.Delta - detuning) / (2 * constants.gamma_e), constants)


def _coerce(value: str):
    v = value.strip()
    low = v.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def parse_params(text: str, source: str = "<string>") -> dict:
    """Parse flat ``key = value`` text. Comments start with '#' or ';'."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    parser.optionxform = str
    try:
        parser.read_string("[params]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if len(parser.sections()) != 1:
        raise ConfigError(f"{source}: section headers are not allowed")
    out = {}
    for key, value in parser["params"].items():
        if value is None or value.strip() == "":
            raise ConfigError(f"{source}: key {key!r} has no value")
        out[key] = _coerce(value)
    return _normalize_units(out, source)


def _normalize_units(values: dict, source: str) -> dict:
    out = dict(values)
    for key in list(out):
        if key.endswith("_ppm"):
            base = key[: -len("_ppm")] + "_m3"
            if base in values:
                raise ConfigError(f"{source}: both {key} and {base} given")
            out[base] = ppm_to_density(float(out.pop(key)))
        elif key.endswith("_cm3"):
            base = key[: -len("_cm3")] + "_m3"
            if base in values:
                raise ConfigError(f"{source}: both {key} and {base} given")
            out[base] = float(out.pop(key)) * 1e6
    return out


def load_param_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read parameter file {path}: {exc}") from None
    return parse_params(text, str(path))
