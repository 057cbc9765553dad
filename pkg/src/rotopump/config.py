"""Run-parameter schema: flat keys with units in their names, plus builders.

Every recognised key, its type and its default lives in ``SCHEMA``. Unknown
keys are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .params import (
    DEFAULT_CONSTANTS,
    CrystalSpec,
    FieldSpec,
    PhysicalConstants,
    RateSet,
    matching_field,
    moment_from_rotor_rate,
    parse_params,
    load_param_file,
)

__all__ = ["SCHEMA", "RunParameters", "parse_override", "load_run_parameters"]

_NONE = object()

# key: (type, default); default None means "derived" or "unset"
SCHEMA: dict[str, tuple[type, object]] = {
    # rates, s^-1
    "gamma_d_hz": (float, 1e6),
    "gamma_o_hz": (float, 1e5),
    "gamma_l_hz": (float, 0.0),
    "gamma_nv_hz": (float, 1e3),
    "gamma_p1_hz": (float, None),
    # crystal
    "rho_kg_m3": (float, 3515.0),
    "c_sound_m_s": (float, 1.2e4),
    "volume_m3": (float, 1e-12),
    "temperature_k": (float, 293.0),
    "eta_m3": (float, 1.76e23),
    "r_min_m": (float, 1e-9),
    "r_max_m": (float, None),
    "moment_of_inertia_kg_m2": (float, None),
    "rotor_rate_rad_s": (float, None),
    # field
    "b_field_t": (float, None),
    "detuning_rad_s": (float, None),
    # rotor simulation
    "sigma_m": (float, 0.0),
    "t_init_k": (float, None),
    "dt_s": (float, 1e-8),
    "t_total_s": (float, 1e-4),
    "snapshot_stride": (int, 100),
    "n_trajectories": (int, 10),
    "hop_factor": (float, 1.0),
    "max_sites": (int, 20000),
    "record_distributions": (bool, True),
    "seed": (int, 0),
    # rate sweep
    "gamma_o_min_hz": (float, 1e3),
    "gamma_o_max_hz": (float, 1e8),
    "gamma_o_points": (int, 61),
    "gamma_l_list_hz": (str, "0,1e6"),
    # phonon volume sweep
    "volume_min_m3": (float, 1e-16),
    "volume_max_m3": (float, 1e-6),
    "volume_points": (int, 41),
    "exact_prefactor": (bool, False),
    "wavelength_convention": (str, "hz"),
    # design
    "osc_freq_hz": (float, 1e3),
    "osc_q": (float, 1e4),
    "osc_inertia_kg_m2": (float, 1e-12),
    "osc_noise_nm": (float, 1e-18),
    "spot_radius_m": (float, 50e-6),
    "thickness_m": (float, 300e-6),
    "y_sat_w_m2": (float, 1e9),
    "gamma_o_sat_hz": (float, 1e6),
    "a_par_hz": (float, 114e6),
    "a_perp_hz": (float, 81.3e6),
    "hyperfine_anisotropic": (bool, False),
    "field_min_t": (float, None),
    "field_max_t": (float, None),
    "field_points": (int, 2001),
    "lineshape": (str, "lorentzian"),
}


def _convert(key: str, value, source: str):
    kind = SCHEMA[key][0]
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            low = str(value).strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(value)
            return v
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: {key} expects {kind.__name__}, got {value!r}") from None


def parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


@dataclass
class RunParameters:
    values: dict
    constants: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    @classmethod
    def from_mapping(cls, raw: dict, source: str = "<params>") -> "RunParameters":
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"{source}: unknown keys {', '.join(unknown)}")
        values = {k: d for k, (_, d) in SCHEMA.items()}
        for k, v in raw.items():
            values[k] = _convert(k, v, source)
        return cls(values)

    def with_overrides(self, overrides: list[tuple[str, str]]) -> "RunParameters":
        raw = {k: v for k, v in self.values.items()}
        text = "\n".join(f"{k} = {v}" for k, v in overrides)
        parsed = parse_params(text, "--set")
        unknown = sorted(set(parsed) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"--set: unknown keys {', '.join(unknown)}")
        for k, v in parsed.items():
            raw[k] = _convert(k, v, "--set")
        return RunParameters(raw, self.constants)

    def __getitem__(self, key):
        return self.values[key]

    def canonical_json(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # builders -------------------------------------------------------------

    def rates(self) -> RateSet:
        v = self.values
        return RateSet(gamma_d=v["gamma_d_hz"], gamma_o=v["gamma_o_hz"], gamma_l=v["gamma_l_hz"],
                       gamma_nv=v["gamma_nv_hz"], gamma_p1=v["gamma_p1_hz"])

    def moment_of_inertia(self) -> float:
        v = self.values
        if v["rotor_rate_rad_s"] is not None:
            if v["moment_of_inertia_kg_m2"] is not None:
                raise ConfigError("give rotor_rate_rad_s or moment_of_inertia_kg_m2, not both")
            return moment_from_rotor_rate(v["rotor_rate_rad_s"], self.constants)
        if v["moment_of_inertia_kg_m2"] is not None:
            return v["moment_of_inertia_kg_m2"]
        return self.crystal().moment_of_inertia

    def crystal(self) -> CrystalSpec:
        v = self.values
        free = v["rotor_rate_rad_s"] is not None or v["moment_of_inertia_kg_m2"] is not None
        inertia = None
        if free:
            inertia = (moment_from_rotor_rate(v["rotor_rate_rad_s"], self.constants)
                       if v["rotor_rate_rad_s"] is not None else v["moment_of_inertia_kg_m2"])
        return CrystalSpec(rho=v["rho_kg_m3"], c_sound=v["c_sound_m_s"], volume=v["volume_m3"],
                           temperature=v["temperature_k"], eta=v["eta_m3"], r_min=v["r_min_m"],
                           r_max=v["r_max_m"], moment_of_inertia=inertia,
                           geometry="free" if free else "sphere")

    def field(self) -> FieldSpec:
        v = self.values
        if v["b_field_t"] is not None and v["detuning_rad_s"] is not None:
            raise ConfigError("give b_field_t or detuning_rad_s, not both")
        if v["detuning_rad_s"] is not None:
            return FieldSpec.from_detuning(v["detuning_rad_s"], self.constants)
        if v["b_field_t"] is not None:
            return FieldSpec(v["b_field_t"], self.constants)
        return FieldSpec(matching_field(self.constants), self.constants)

    def float_list(self, key: str) -> list[float]:
        try:
            return [float(x) for x in str(self.values[key]).split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"{key} must be a comma-separated list of numbers") from None


def load_run_parameters(path, overrides: list[tuple[str, str]] | None = None) -> RunParameters:
    p = RunParameters.from_mapping(load_param_file(path), str(path))
    if overrides:
        p = p.with_overrides(overrides)
    return p
