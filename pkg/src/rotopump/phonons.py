"""Spin to phonon-spin conversion: non-resonant and resonant second-order channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import AccuracyError, InvalidParameterError
from .operators import spin_phonon_coefficients, spin_matrices
from .params import (
    DEFAULT_CONSTANTS,
    CrystalSpec,
    PhysicalConstants,
    alpha_coupling,
    matching_field,
    nu1 as _nu1,
    resonant_wavelength,
)

__all__ = [
    "PhononChannelReport",
    "angular_integral_k4",
    "theta_r_integrals",
    "LambdaFactor",
    "lambda_factor",
    "bose_integrand",
    "bose_integral_nu",
    "bose_integral",
    "gamma_sp2_nonres",
    "resonant_coupling_G",
    "three_level_hamiltonian",
    "three_level_transfer",
    "three_level_short_time",
    "gamma_sp2_res",
    "EXACT_RES_PREFACTOR",
    "second_order_element",
    "second_order_element_sum",
    "squared_element_isotropic",
    "phonon_spin",
    "channel_report",
]

EXACT_RES_PREFACTOR = (4.8 / 13120.3) ** 0.25


def angular_integral_k4(theta_r, r: float = 1.0):
    """Closed form of the solid-angle integral of (k_hat . r)^4 over k_hat."""
    c = np.cos(theta_r)
    s = np.sin(theta_r)
    return math.pi * r**4 * (24 / 15 * c**2 * s**2 + 0.8 * c**4 + 0.8 * s**4)


def _polar_quad(f, tol=1e-10):
    val, err = integrate.quad(lambda t: f(t) * math.sin(t), 0.0, math.pi, epsabs=0, epsrel=tol, limit=200)
    if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300) + 1e-14:
        raise AccuracyError(f"polar quadrature did not converge (estimate {val}, error {err})")
    return 2 * math.pi * val


def theta_r_integrals(weight=None) -> dict:
    """Angular integrals of the b1 angular factor (3 cos + 4 cos 3theta)^4.

    Returns ``I_a`` (cos^2 sin^2 weight) and ``I_b`` (cos^4 + sin^4 weight),
    each including the trivial 2 pi from the azimuth. ``weight`` replaces the
    b1 factor, mainly for testing.
    """
    if weight is None:
        def weight(t):
            return (3 * math.cos(t) + 4 * math.cos(3 * t)) ** 4

    ia = _polar_quad(lambda t: math.cos(t) ** 2 * math.sin(t) ** 2 * weight(t))
    ib = _polar_quad(lambda t: (math.cos(t) ** 4 + math.sin(t) ** 4) * weight(t))
    return {"I_a": ia, "I_b": ib}


@dataclass(frozen=True)
class LambdaFactor:
    value: float
    simplified: float

    @property
    def ratio(self) -> float:
        return self.value / self.simplified


def lambda_factor(eta: float, r_min: float, r_max: float = math.inf,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS) -> LambdaFactor:
    """Spatially averaged fourth-power coupling, in J^4 m^3 (alpha_E convention).

    ``value`` keeps the r_max shell and the 1/(2^5 pi 21) factor; ``simplified``
    is the r_min-only approximation with 1/(5 27 pi).
    """
    if not r_min < r_max:
        raise InvalidParameterError("r_min must be below r_max")
    a4 = alpha_coupling(constants) ** 4
    value = eta * (r_min**-9 - r_max**-9) * a4 / (2**5 * math.pi) / 21
    simplified = eta / r_min**9 * (a4 / 5) / (27 * math.pi)
    return LambdaFactor(value, simplified)


def bose_integrand(nu, nu0: float, nu1: float):
    """nu^4 n (n+1) / ((nu0^2 - nu^2)^2 + nu1^4) with n the Bose occupation."""
    nu = np.asarray(nu, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        # n (n+1) = 1 / (4 sinh^2(nu/2)); nu^4 n(n+1) -> nu^2 as nu -> 0
        half = 0.5 * nu
        sh = np.sinh(half)
        small = np.abs(half) < 1e-8
        ratio = np.where(small, 1.0, half / np.where(small, 1.0, sh))
        bose = nu**2 * ratio**2
        bose = np.where(np.isinf(sh), 0.0, bose)
        denom = (nu0**2 - nu**2) ** 2 + nu1**4
        return bose / denom


def _segments(nu0: float, nu1: float, upper: float):
    """Breakpoints resolving the resonance around nu0 on a log ladder."""
    width = nu1**2 / (2 * nu0) if nu0 > 0 else nu1
    pts = {0.0, upper}
    if 0 < nu0 < upper:
        pts.add(nu0)
        outer = max(10 * nu1, 1e3 * width)
        step = width
        while step < outer:
            for p in (nu0 - step, nu0 + step):
                if 0 < p < upper:
                    pts.add(p)
            step *= 4.0
        for p in (nu0 - outer, nu0 + outer):
            if 0 < p < upper:
                pts.add(p)
        # ordinary geometric ladder for the smooth shoulders
        for p in np.geomspace(max(nu0 * 1e-3, 1e-300), nu0, 8):
            pts.add(float(p))
        for p in nu0 * np.array([1.5, 2, 4, 10, 1e2, 1e3]):
            if p < upper:
                pts.add(float(p))
    for p in (1.0, 5.0, 20.0):
        if p < upper:
            pts.add(p)
    return sorted(pts)


def bose_integral_nu(nu0: float, nu1: float, upper: float = math.inf, rtol: float = 1e-4) -> float:
    """Regularized Bose integral in reduced units, integrated from 0 to ``upper``."""
    if not (nu1 > 0 and nu0 >= 0):
        raise InvalidParameterError("need nu1 > 0 and nu0 >= 0")
    cutoff = min(upper, 60.0 + 2 * nu0)
    pts = _segments(nu0, nu1, cutoff)
    total = 0.0
    err_total = 0.0
    f = lambda x: float(bose_integrand(x, nu0, nu1))
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        val, err = integrate.quad(f, a, b, epsabs=0, epsrel=rtol * 1e-2, limit=200)
        total += val
        err_total += err
    if upper > cutoff:
        val, err = integrate.quad(f, cutoff, upper, epsabs=0, epsrel=rtol, limit=200)
        total += val
        err_total += err
    if not math.isfinite(total) or err_total > rtol * abs(total):
        raise AccuracyError(f"Bose integral not converged: {total} +- {err_total}")
    return total


def bose_integral(temperature: float, omega0: float, gamma_d: float,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Regularized Bose integral in units of k_B T / hbar."""
    if not temperature > 0:
        raise InvalidParameterError("temperature must be positive")
    n0 = constants.hbar * omega0 / (constants.k_B * temperature)
    n1 = _nu1(temperature, gamma_d, constants)
    return bose_integral_nu(n0, n1)


def gamma_sp2_nonres(crystal: CrystalSpec, gamma_d: float, b_field: float | None = None,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Non-resonant two-phonon conversion rate, s^-1, with rho_ss = 1/Gamma_d."""
    if b_field is None:
        b_field = matching_field(constants)
    omega0 = constants.gamma_e * b_field
    lam = lambda_factor(crystal.eta, crystal.r_min, crystal.r_max, constants).value
    integral = bose_integral(crystal.temperature, omega0, gamma_d, constants)
    omega_integral = constants.k_B * crystal.temperature / constants.hbar * integral
    pref = 2 * math.pi / constants.hbar**2 * lam * omega0**2 / (crystal.rho**2 * crystal.volume * crystal.c_sound**7)
    return pref * omega_integral / gamma_d


def resonant_coupling_G(crystal: CrystalSpec, r: float, kdot: float, theta: float = 0.0,
                        exact_occupation: bool = False, b_field: float | None = None,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Magnitude of the resonant one-phonon matrix element, J.

    ``kdot`` is k_hat . r_hat. With ``exact_occupation`` the Bose factor at
    omega0 is used instead of its high-temperature limit.
    """
    b1 = spin_phonon_coefficients(r, theta, constants=constants)["b1"]
    kt = constants.k_B * crystal.temperature
    if exact_occupation:
        if b_field is None:
            b_field = matching_field(constants)
        hw = constants.hbar * constants.gamma_e * b_field
        kt = hw / math.expm1(hw / kt)
    return abs(kdot * r * b1 / (2 * crystal.c_sound) * math.sqrt(kt / (2 * crystal.rho * crystal.volume)))


def three_level_hamiltonian(G: complex, E: float = 0.0) -> np.ndarray:
    """Resonant subspace Hamiltonian in the basis (i, g, f)."""
    g = complex(G)
    return np.array([[E, g, 0], [g.conjugate(), E, 2 * g], [0, 2 * g.conjugate(), E]], dtype=complex)


def three_level_transfer(G, t, hbar: float = DEFAULT_CONSTANTS.hbar):
    """Probability |<f| exp(-i H t / hbar) |i>|^2."""
    x = math.sqrt(5) * np.abs(G) * np.asarray(t) / hbar
    return 4 / 25 * (1 - np.cos(x)) ** 2


def three_level_short_time(G, t, hbar: float = DEFAULT_CONSTANTS.hbar):
    """Leading t^4 term of :func:`three_level_transfer`: |G|^4 t^4 / hbar^4."""
    return (np.abs(G) * np.asarray(t) / hbar) ** 4


def gamma_sp2_res(crystal: CrystalSpec, eta: float | None = None, r_min: float | None = None,
                  exact_prefactor: bool = False, b_field: float | None = None,
                  wavelength_convention: str = "hz",
                  constants: PhysicalConstants = DEFAULT_CONSTANTS) -> tuple[float, bool]:
    """Resonant conversion rate, s^-1, and whether the crystal quenches it.

    The channel is cut off when V < lambda0^3, the crystal being too small to
    host the resonant phonon mode.
    """
    eta = crystal.eta if eta is None else eta
    r_min = crystal.r_min if r_min is None else r_min
    if b_field is None:
        b_field = matching_field(constants)
    lam0 = resonant_wavelength(crystal.c_sound, constants.gamma_e * b_field, wavelength_convention)
    if crystal.volume < lam0**3:
        return 0.0, True
    pref = EXACT_RES_PREFACTOR if exact_prefactor else 0.1
    rate = (pref * alpha_coupling(constants) / (crystal.c_sound * constants.hbar)
            * math.sqrt(constants.k_B * crystal.temperature / (crystal.rho * crystal.volume))
            * (2 * math.pi * eta / r_min**9) ** 0.25)
    return rate, False


def second_order_element(kdotr: float, b1: float, omega_k: float, omega0: float,
                         rho: float, volume: float, n_minus: int, n_plus: int) -> float:
    """Closed form of the two-phonon matrix element through the virtual states, J."""
    return (kdotr**2 * b1**2 * omega0 * math.sqrt(n_minus * (n_plus + 1))
            / (2 * rho * volume * omega_k * (omega0**2 - omega_k**2)))


def squared_element_isotropic(khat_dot_r: float, b1: float, omega_k: float, omega0: float,
                              rho: float, volume: float, c_sound: float, n: float) -> float:
    """|matrix element|^2 with n_+ = n_- = n and omega_k = c k."""
    return (khat_dot_r**4 * b1**4 * omega0**2 * omega_k**2 * n * (n + 1)
            / (4 * rho**2 * volume**2 * c_sound**4 * (omega0**2 - omega_k**2) ** 2))


def _fock(nmax: int):
    a = np.diag(np.sqrt(np.arange(1, nmax + 1)), 1)
    return a, np.eye(nmax + 1)


def second_order_element_sum(kdotr: float, b1: float, omega_k: float, omega0: float,
                             rho: float, volume: float, n_minus: int, n_plus: int,
                             spin_one_norm: bool = True,
                             constants: PhysicalConstants = DEFAULT_CONSTANTS) -> complex:
    """Brute-force second-order amplitude from explicit operators.

    Builds NV (spin-1) x P1 (spin-1/2) x two circular phonon modes, applies the
    b1 part of the spin-phonon Hamiltonian and sums over every intermediate
    eigenstate of the unperturbed Hamiltonian. Spin operators are in units of
    hbar. ``spin_one_norm=False`` replaces the spin-1 lowering element sqrt(2)
    by 1, the normalization under which the closed form is written.
    """
    hbar = constants.hbar
    sp = spin_matrices(hbar=1.0)
    s1 = sp["S"]
    i12 = sp["I"]
    s_minus = s1["-"].copy()
    if not spin_one_norm:
        s_minus = s_minus / math.sqrt(2)
    nm = n_minus + 2
    npl = n_plus + 2
    a, eye_f_m = _fock(nm)
    b, eye_f_p = _fock(npl)
    e3, e2 = np.eye(3), np.eye(2)

    def kron(*ops):
        out = ops[0]
        for o in ops[1:]:
            out = np.kron(out, o)
        return out

    a_minus = kron(e3, e2, a, eye_f_p)
    a_plus = kron(e3, e2, eye_f_m, b)
    sz = kron(s1["z"], e2, eye_f_m, eye_f_p)
    sm = kron(s_minus, e2, eye_f_m, eye_f_p)
    iz = kron(e3, i12["z"], eye_f_m, eye_f_p)
    im = kron(e3, i12["-"], eye_f_m, eye_f_p)
    delta_1m = sz @ im + sm @ iz
    amp = math.sqrt(hbar / (2 * rho * volume * omega_k))
    pi_1p = amp * (a_minus + a_plus.conj().T)
    v = 1j * kdotr * b1 * pi_1p @ delta_1m
    v = v + v.conj().T
    # unperturbed energies (J): NV crystal field at the matching condition,
    # Zeeman terms and phonon quanta
    Delta = 2 * omega0
    h0_diag = hbar * (Delta * np.diag(sz @ sz).real + omega0 * np.diag(sz).real + omega0 * np.diag(iz).real
                      + omega_k * np.diag(a_minus.conj().T @ a_minus).real
                      + omega_k * np.diag(a_plus.conj().T @ a_plus).real)

    def index(ms, mi, km, kp):
        return ((1 - ms) * 2 + (0 if mi > 0 else 1)) * (nm + 1) * (npl + 1) + km * (npl + 1) + kp

    i = index(0, +1, n_minus, n_plus)
    f = index(-1, -1, n_minus - 1, n_plus + 1)
    total = 0.0 + 0.0j
    for g in range(len(h0_diag)):
        if g in (i, f):
            continue
        w = v[f, g] * v[g, i]
        if w != 0:
            total += w / (h0_diag[i] - h0_diag[g])
    return total


def phonon_spin(n_plus, n_minus, khat, hbar: float = DEFAULT_CONSTANTS.hbar) -> np.ndarray:
    """Phonon spin vector hbar sum_k k_hat (n_k+ - n_k-)."""
    n_plus = np.asarray(n_plus)
    n_minus = np.asarray(n_minus)
    khat = np.asarray(khat, dtype=float).reshape(-1, 3)
    return hbar * ((n_plus - n_minus)[:, None] * khat).sum(axis=0)


@dataclass(frozen=True)
class PhononChannelReport:
    gamma_sp2_nonres: float
    gamma_sp2_res: float
    lambda_factor: float
    integral_value: float
    quenched: bool


def channel_report(crystal: CrystalSpec, gamma_d: float, b_field: float | None = None,
                   constants: PhysicalConstants = DEFAULT_CONSTANTS) -> PhononChannelReport:
    if b_field is None:
        b_field = matching_field(constants)
    integral = bose_integral(crystal.temperature, constants.gamma_e * b_field, gamma_d, constants)
    res, quenched = gamma_sp2_res(crystal, b_field=b_field, constants=constants)
    return PhononChannelReport(
        gamma_sp2_nonres=gamma_sp2_nonres(crystal, gamma_d, b_field, constants),
        gamma_sp2_res=res,
        lambda_factor=lambda_factor(crystal.eta, crystal.r_min, crystal.r_max, constants).value,
        integral_value=integral,
        quenched=quenched,
    )
