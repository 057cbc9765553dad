"""Built-in invariant suite behind ``rotopump verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .operators import (
    CompositeHilbertSpace,
    PairGeometry,
    build_full_hamiltonian,
    conditional_shift,
    two_pair_transformed_hamiltonian,
    u_phi_operator,
)
from .params import FieldSpec, RateSet
from .phonons import angular_integral_k4, three_level_hamiltonian, three_level_transfer, theta_r_integrals
from .rates import steady_state

__all__ = ["Check", "run_checks"]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


def _interior_block(a, mask):
    a = a.toarray() if hasattr(a, "toarray") else np.asarray(a)
    return a[np.ix_(mask, mask)]


def check_total_momentum(seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    geo = PairGeometry(r=rng.uniform(1e-9, 3e-9), theta=rng.uniform(0.1, 3.0), varphi=rng.uniform(0, 6.28))
    space = CompositeHilbertSpace(-6, 6)
    h = build_full_hamiltonian(geo, FieldSpec.matched(), 10.0, space)
    jz = space.Jz()
    comm = (h @ jz - jz @ h)
    mask = space.interior_mask(2)
    scale = abs(h).max()
    return Check("[H, J_z] = 0 on interior sites (relative)", float(np.abs(_interior_block(comm, mask)).max() / scale), 1e-12)


def check_ladder() -> Check:
    space = CompositeHilbertSpace(-5, 5)
    lz = np.diag(space.m.astype(float))
    lp = space.lambda_plus(1).toarray()
    lm = lp.conj().T
    keep = slice(1, space.n_rotor - 1)
    err = max(np.abs((lz @ lp - lp @ lz - lp)[keep, keep]).max(),
              np.abs((lz @ lm - lm @ lz + lm)[keep, keep]).max())
    return Check("[L_z, lambda_pm] = pm hbar lambda_pm", float(err), 0.0)


def _pair_ops(n):
    d2m = math.sqrt(2) * np.array([[0, 0], [1, 0]], dtype=complex)
    lp2 = np.diag(np.ones(n - 2), -2).astype(complex)
    return d2m, lp2


def check_shift_identities() -> list[Check]:
    m_min, m_max = -8, 8
    n = m_max - m_min + 1
    u = u_phi_operator(m_min, m_max)
    d2m, lp2 = _pair_ops(n)
    lm2 = lp2.conj().T
    eye2 = np.eye(2)
    m = np.arange(m_min, m_max + 1).astype(float)
    keep = np.tile((m >= m_min + 4) & (m <= m_max - 4), 4)
    lhs_m = u @ np.kron(np.kron(d2m, eye2), np.eye(n)) @ u.conj().T
    rhs_m = np.kron(np.kron(d2m, eye2), lp2)
    lhs_p = u @ np.kron(np.kron(d2m.conj().T, eye2), np.eye(n)) @ u.conj().T
    rhs_p = np.kron(np.kron(d2m.conj().T, eye2), lm2)
    k = np.diag(np.kron(np.diag([0.5, -1.5]), eye2) + np.kron(eye2, np.diag([0.5, -1.5])))
    lz2 = np.kron(np.eye(4), np.diag(m**2))
    lhs_l = u @ lz2 @ u.conj().T
    rhs_l = np.diag((np.repeat(k, n) + np.tile(m, 4)) ** 2)
    blk = lambda a: a[np.ix_(keep, keep)]  # noqa: E731
    unitary = np.abs(blk(conditional_shift(m_min, m_max, -1) @ conditional_shift(m_min, m_max, +1)) - np.eye(keep.sum())).max()
    return [
        Check("U delta_2- U^dag = e^{2i phi} delta_2-", float(np.abs(blk(lhs_m - rhs_m)).max()), 1e-12),
        Check("U delta_2+ U^dag = e^{-2i phi} delta_2+", float(np.abs(blk(lhs_p - rhs_p)).max()), 1e-12),
        Check("U L_z^2 U^dag = (K + L_z)^2", float(np.abs(blk(lhs_l - rhs_l)).max() / np.abs(rhs_l).max()), 1e-12),
        Check("conditional shifts are mutually inverse", float(unitary), 1e-12),
    ]


def check_two_pair(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for label in ("jz", "negated"):
        d2a = complex(*rng.normal(size=2)) * 1e5
        d2b = complex(*rng.normal(size=2)) * 1e5
        m = int(rng.integers(-5, 6))
        res = two_pair_transformed_hamiltonian(d2a, d2b, 10.0, m, label=label)
        scale = np.abs(res.explicit).max()
        out.append(Check(f"two-pair closed form vs conjugation ({label})", res.brute_force_error / scale, 1e-10))
    return out


def check_quadrature() -> list[Check]:
    d = theta_r_integrals()
    rng = np.random.default_rng(1)
    n = 400_000
    theta = 0.7
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    rhat = np.array([math.sin(theta), 0.0, math.cos(theta)])
    mc = 4 * math.pi * np.mean((v @ rhat) ** 4)
    exact = float(angular_integral_k4(theta))
    return [
        Check("theta_r integral I_a vs 30 pi (relative)", abs(d["I_a"] / (30 * math.pi) - 1), 0.02),
        Check("theta_r integral I_b vs 376 pi (relative)", abs(d["I_b"] / (376 * math.pi) - 1), 0.02),
        Check("angular k^4 integral vs Monte Carlo (relative)", abs(mc / exact - 1), 0.005),
    ]


def check_three_level(seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        g = complex(*rng.normal(size=2))
        t = rng.uniform(0, 10)
        psi = linalg.expm(-1j * three_level_hamiltonian(g) * t)[:, 0]
        worst = max(worst, abs(abs(psi[2]) ** 2 - float(three_level_transfer(g, t, hbar=1.0))))
    return Check("three-level closed form vs expm", worst, 1e-10)


def check_steady_state() -> Check:
    ss = steady_state(RateSet(gamma_d=1e6, gamma_o=1e5, gamma_l=0.0, gamma_nv=1e3))
    ok = ss.residual < 1e-10 and abs(ss.populations.sum() - 1) < 1e-12 and ss.populations.min() >= 0
    return Check("steady-state residual (0 if all invariants hold)", ss.residual if ok else math.inf, 1e-10)


def run_checks(seed: int = 0) -> list[Check]:
    checks = [check_total_momentum(seed), check_ladder()]
    checks += check_shift_identities()
    checks += check_two_pair(seed)
    checks += check_quadrature()
    checks.append(check_three_level(seed))
    checks.append(check_steady_state())
    return checks
