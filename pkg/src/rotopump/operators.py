"""Exact small-space operators for the NV-P1 pair coupled to a planar rotor.

Units: Hamiltonians are returned as H/hbar in rad/s, spin operators are
dimensionless (hbar = 1) unless a ``hbar`` scale is passed explicitly, and the
rotor basis is |m> with L_z = hbar m.

Product basis ordering: NV m_S in (+1, 0, -1), P1 m_I in (+1/2, -1/2), then
rotor m ascending.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import SingularGeometryError
from .params import DEFAULT_CONSTANTS, FieldSpec, PhysicalConstants, alpha_omega

__all__ = [
    "spin_matrices",
    "PairGeometry",
    "CompositeHilbertSpace",
    "dipolar_coefficients",
    "spin_phonon_coefficients",
    "b1_from_gradient",
    "dipolar_hamiltonian_classical",
    "build_full_hamiltonian",
    "PairTruncation",
    "truncate_to_pair_subspace",
    "pair_chain_parameters",
    "TwoPairResult",
    "two_pair_transformed_hamiltonian",
    "two_pair_explicit",
    "two_pair_lab_hamiltonian",
    "conditional_shift",
    "u_phi_operator",
    "to_coo_text",
]


def spin_matrices(hbar: float = 1.0) -> dict:
    """Spin-1 (``S``) and spin-1/2 (``I``) matrices; keys z, +, -, x, y."""
    s2 = math.sqrt(2.0)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    sp = np.array([[0, s2, 0], [0, 0, s2], [0, 0, 0]], dtype=complex)
    iz = np.diag([0.5, -0.5]).astype(complex)
    ip = np.array([[0, 1], [0, 0]], dtype=complex)
    out = {}
    for name, z, p in (("S", sz, sp), ("I", iz, ip)):
        m = p.conj().T
        out[name] = {
            "z": hbar * z,
            "+": hbar * p,
            "-": hbar * m,
            "x": hbar * (p + m) / 2,
            "y": hbar * (p - m) / 2j,
        }
    return out


@dataclass(frozen=True)
class PairGeometry:
    r: float
    theta: float = math.pi / 2
    varphi: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise SingularGeometryError(f"inter-spin distance must be positive, got {self.r!r}")
        if not 0 <= self.theta <= math.pi:
            raise SingularGeometryError("theta must lie in [0, pi]")
        object.__setattr__(self, "varphi", self.varphi % (2 * math.pi))
        object.__setattr__(self, "phi", self.phi % (2 * math.pi))


class CompositeHilbertSpace:
    """NV (3) x P1 (2) x rotor window [m_min, m_max]."""

    def __init__(self, m_min: int = -5, m_max: int = 5):
        if m_max < m_min:
            raise ValueError("empty rotor window")
        self.m_min = int(m_min)
        self.m_max = int(m_max)
        self.m = np.arange(self.m_min, self.m_max + 1)
        self.n_rotor = len(self.m)
        self.dim = 6 * self.n_rotor

    def spin_op(self, op_nv=None, op_p1=None):
        a = np.eye(3) if op_nv is None else op_nv
        b = np.eye(2) if op_p1 is None else op_p1
        return sparse.kron(sparse.kron(sparse.csr_matrix(a), sparse.csr_matrix(b)),
                           sparse.identity(self.n_rotor), format="csr")

    def rotor_op(self, op):
        return sparse.kron(sparse.identity(6), sparse.csr_matrix(op), format="csr")

    def lambda_plus(self, power: int = 1):
        """Shift |m> -> |m + power> (unit amplitude, truncated at the edges)."""
        return sparse.diags(np.ones(self.n_rotor - abs(power)), -power,
                            shape=(self.n_rotor, self.n_rotor), dtype=complex, format="csr")

    def Sz(self, hbar=1.0):
        return self.spin_op(op_nv=spin_matrices(hbar)["S"]["z"])

    def Iz(self, hbar=1.0):
        return self.spin_op(op_p1=spin_matrices(hbar)["I"]["z"])

    def Lz(self, hbar=1.0):
        return self.rotor_op(sparse.diags(hbar * self.m.astype(float)))

    def Jz(self, hbar=1.0):
        return self.Sz(hbar) + self.Iz(hbar) + self.Lz(hbar)

    def index(self, m_s: int, m_i: float, m: int) -> int:
        return ((1 - m_s) * 2 + (0 if m_i > 0 else 1)) * self.n_rotor + (m - self.m_min)

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        keep = (self.m >= self.m_min + margin) & (self.m <= self.m_max - margin)
        return np.tile(keep, 6)


def dipolar_coefficients(geometry: PairGeometry, constants: PhysicalConstants = DEFAULT_CONSTANTS,
                         alpha: float | None = None) -> dict:
    """d0, d1, d2 in rad/s (alpha_omega convention)."""
    a = alpha_omega(constants) if alpha is None else alpha
    r3 = geometry.r**3
    c, s = math.cos(geometry.theta), math.sin(geometry.theta)
    ph = geometry.varphi
    return {
        "d0": a / r3 * (1 - 3 * c * c),
        "d1": -1.5 * a / r3 * s * c * complex(math.cos(ph), math.sin(ph)),
        "d2": -0.75 * a / r3 * s * s * complex(math.cos(2 * ph), math.sin(2 * ph)),
    }


def spin_phonon_coefficients(r: float, theta: float, constants: PhysicalConstants = DEFAULT_CONSTANTS,
                             alpha: float | None = None) -> dict:
    """b0, b1 (alpha/r^4 units; default alpha is alpha_E, giving J/m)."""
    if not r > 0:
        raise SingularGeometryError("r must be positive")
    from .params import alpha_coupling

    a = alpha_coupling(constants) if alpha is None else alpha
    c = math.cos(theta)
    return {
        "b0": -1.5 * a / r**4 * c * (1 - 5 * math.cos(2 * theta)),
        "b1": -3 * a / (16 * r**4) * (3 * c + 4 * math.cos(3 * theta)),
    }


def b1_from_gradient(r: float, theta: float, alpha: float = 1.0) -> float:
    """Coefficient of dR_- delta_{1+} obtained by differentiating d1*.

    Equals (d/dx + i d/dy) d1* / 2, which is -(3 alpha / 4 r^4) cos(theta)
    (5 cos^2 theta - 3).
    """
    c = math.cos(theta)
    return -0.75 * alpha / r**4 * c * (5 * c * c - 3)


def dipolar_hamiltonian_classical(vec, alpha: float = 1.0) -> dict:
    """d0 and d1* as functions of a Cartesian inter-spin vector (for gradients)."""
    x, y, z = (float(v) for v in vec)
    r2 = x * x + y * y + z * z
    r = math.sqrt(r2)
    if r == 0:
        raise SingularGeometryError("zero separation")
    d0 = alpha * (1 / r**3 - 3 * z * z / r**5)
    d1c = -1.5 * alpha * z * complex(x, -y) / r**5
    return {"d0": d0, "d1c": d1c}


def _two_spin_ops(hbar: float = 1.0) -> dict:
    sp = spin_matrices(hbar)
    S, I = sp["S"], sp["I"]
    k = np.kron
    return {
        "delta0": k(S["z"], I["z"]) - 0.25 * (k(S["-"], I["+"]) + k(S["+"], I["-"])),
        "delta1+": k(S["z"], I["+"]) + k(S["+"], I["z"]),
        "delta1-": k(S["z"], I["-"]) + k(S["-"], I["z"]),
        "delta2+": k(S["+"], I["+"]),
        "delta2-": k(S["-"], I["-"]),
    }


def build_full_hamiltonian(geometry: PairGeometry, field: FieldSpec, rotor_rate: float,
                           space: CompositeHilbertSpace,
                           constants: PhysicalConstants = DEFAULT_CONSTANTS,
                           alpha: float | None = None) -> sparse.csr_matrix:
    """H / hbar (rad/s) for one pair coupled to the rotor.

    ``rotor_rate`` is hbar / 2J; the dipolar coefficients use the crystal-frame
    azimuth, the rotor phase entering only through the lambda shift operators.
    """
    d = dipolar_coefficients(geometry, constants, alpha)
    ops = _two_spin_ops()
    sp = spin_matrices()
    S, I = sp["S"], sp["I"]
    n = space.n_rotor
    eye_r = sparse.identity(n, dtype=complex, format="csr")
    lp = space.lambda_plus(1)
    lm = lp.conj().T
    lp2 = space.lambda_plus(2)
    lm2 = lp2.conj().T

    def kr(spin, rot):
        return sparse.kron(sparse.csr_matrix(spin), rot, format="csr")

    spin_static = (constants.Delta * np.kron(S["z"] @ S["z"], np.eye(2))
                   + field.omega0 * np.kron(S["z"], np.eye(2))
                   + field.omega0 * np.kron(np.eye(3), I["z"]))
    h = kr(spin_static, eye_r)
    h = h + kr(d["d0"] * ops["delta0"], eye_r)
    h = h + kr(d["d1"] * ops["delta1-"], lp) + kr(np.conj(d["d1"]) * ops["delta1+"], lm)
    h = h + kr(d["d2"] * ops["delta2-"], lp2) + kr(np.conj(d["d2"]) * ops["delta2+"], lm2)
    h = h + kr(np.eye(6), sparse.diags(rotor_rate * space.m.astype(float) ** 2))
    return h.tocsr()


def pair_chain_parameters(geometry: PairGeometry, field: FieldSpec,
                          constants: PhysicalConstants = DEFAULT_CONSTANTS,
                          alpha: float | None = None) -> dict:
    """Two-chain parameters implied by the full Hamiltonian.

    ``coupling`` is the (A, m) -> (B, m+2) element sqrt(2) d2, ``detuning`` the
    B-chain offset Delta - 2 omega0 + d0/2, ``offset`` the common A energy.
    """
    d = dipolar_coefficients(geometry, constants, alpha)
    return {
        "coupling": math.sqrt(2) * d["d2"],
        "detuning": field.detuning + 0.5 * d["d0"],
        "offset": 0.5 * field.omega0,
    }


@dataclass
class PairTruncation:
    operator: sparse.csr_matrix
    leakage_norm: float
    mixing: float
    hd_norm: float
    indices: np.ndarray


def truncate_to_pair_subspace(h: sparse.spmatrix, space: CompositeHilbertSpace,
                              hd_norm: float | None = None) -> PairTruncation:
    """Restrict H to span{|0,+1/2>, |-1,-1/2>} x rotor, chain A block first.

    ``leakage_norm`` is the spectral-norm bound max-row-sum of the couplings
    from the subspace to its complement; ``mixing`` the largest ratio of such a
    coupling to the corresponding energy gap (first-order admixture).
    """
    h = sparse.csr_matrix(h)
    a_idx = np.array([space.index(0, +0.5, m) for m in space.m])
    b_idx = np.array([space.index(-1, -0.5, m) for m in space.m])
    keep = np.concatenate([a_idx, b_idx])
    rest = np.setdiff1d(np.arange(space.dim), keep)
    block = h[keep][:, keep]
    off = h[rest][:, keep].toarray()
    diag = h.diagonal().real
    leak = float(np.abs(off).sum(axis=0).max()) if off.size else 0.0
    mixing = 0.0
    rows, cols = np.nonzero(np.abs(off) > 0)
    for i, j in zip(rows, cols):
        gap = abs(diag[rest[i]] - diag[keep[j]])
        mixing = max(mixing, abs(off[i, j]) / gap if gap > 0 else math.inf)
    if hd_norm is None:
        hd_norm = leak
    return PairTruncation(block.tocsr(), leak, mixing, hd_norm, keep)


# two-pair sector ----------------------------------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.diag([1.0, -1.0]).astype(complex)
_MU_P = np.array([[0, 1], [0, 0]], dtype=complex)
_MU_M = _MU_P.T.copy()
_K_PAIR = np.diag([0.5, -1.5])  # S_z + I_z on (|0,+1/2>, |-1,-1/2>)


def _rz(angle):
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _ry(angle):
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _u_mu_pair(d2: complex) -> np.ndarray:
    """Rotation taking the pair double-flip term to sqrt(2)|d2| sigma_z."""
    chi = float(np.angle(d2))
    return _ry(-math.pi / 2) @ _rz(-chi)


def two_pair_lab_hamiltonian(d2a: complex, d2b: complex, rotor_rate: float, m_min: int, m_max: int) -> np.ndarray:
    """Dense H/hbar on (pair a) x (pair b) x rotor, each pair in (u, d) = (|0,+1/2>, |-1,-1/2>)."""
    n = m_max - m_min + 1
    m = np.arange(m_min, m_max + 1)
    lp2 = np.diag(np.ones(n - 2), -2).astype(complex)
    hop_a = np.kron(np.kron(math.sqrt(2) * d2a * np.array([[0, 0], [1, 0]]), np.eye(2)), lp2)
    hop_b = np.kron(np.kron(np.eye(2), math.sqrt(2) * d2b * np.array([[0, 0], [1, 0]])), lp2)
    h = hop_a + hop_b
    h = h + h.conj().T
    h = h + np.kron(np.eye(4), np.diag(rotor_rate * m.astype(float) ** 2))
    return h


def _k_total() -> np.ndarray:
    return np.kron(_K_PAIR, np.eye(2)) + np.kron(np.eye(2), _K_PAIR)


def conditional_shift(m_min: int, m_max: int, sign: int = +1) -> np.ndarray:
    """|s, m> -> |s, m + sign K(s)> on the two-pair space (truncated window)."""
    n = m_max - m_min + 1
    k = np.diag(_k_total()).real.astype(int)
    u = np.zeros((4 * n, 4 * n), dtype=complex)
    for s in range(4):
        for j in range(n):
            jt = j + sign * k[s]
            if 0 <= jt < n:
                u[s * n + jt, s * n + j] = 1.0
    return u


def u_phi_operator(m_min: int, m_max: int) -> np.ndarray:
    """exp(-i phi K) with the rotor phase acting as a shift, K = sum S_z + I_z.

    e^{-i phi} lowers m by one, so this is :func:`conditional_shift` with
    ``sign=-1``.
    """
    return conditional_shift(m_min, m_max, sign=-1)


@dataclass
class TwoPairResult:
    hamiltonian: np.ndarray
    explicit: np.ndarray
    secular: np.ndarray
    local_fields: tuple
    transverse_amplitude: float
    coupling_amplitude: float
    double_raising_norm: float
    regime_ok: bool
    brute_force_error: float


def two_pair_explicit(d2a: complex, d2b: complex, rotor_rate: float, m: int, label: str = "jz") -> np.ndarray:
    """Closed-form 4x4 sector Hamiltonian in the mu basis, rad/s.

    ``m`` labels the conserved total angular momentum sector. With
    ``label="jz"`` m is J_z / hbar; ``label="negated"`` uses m = -J_z / hbar,
    under which the transverse term reads 2 rotor_rate (1 - m).
    """
    if label == "negated":
        m = -m
    elif label != "jz":
        raise ValueError(f"unknown sector label {label!r}")
    xa = np.kron(_SX, np.eye(2))
    xb = np.kron(np.eye(2), _SX)
    za = np.kron(_SZ, np.eye(2))
    zb = np.kron(np.eye(2), _SZ)
    w = rotor_rate
    return (math.sqrt(2) * abs(d2a) * za + math.sqrt(2) * abs(d2b) * zb
            + w * (m * m + 2 * m + 3) * np.eye(4)
            + 2 * w * (1 + m) * (xa + xb)
            + 2 * w * xa @ xb)


def two_pair_transformed_hamiltonian(d2a: complex, d2b: complex, rotor_rate: float, m: int,
                                     label: str = "jz", window: int = 6) -> TwoPairResult:
    """Decouple the rotor from two pairs and diagonalize each double-flip term.

    The lab Hamiltonian is built on a rotor slice of ``window`` sites around
    the sector, conjugated by the conditional shift and the per-pair mu
    rotations, and the sector block compared with :func:`two_pair_explicit`.
    """
    jz = -m if label == "negated" else m
    k = np.diag(_k_total()).real.astype(int)
    lo = jz - int(k.max())
    m_min, m_max = lo, lo + window - 1
    if jz - int(k.min()) > m_max:
        raise ValueError("window too small for the sector")
    h = two_pair_lab_hamiltonian(d2a, d2b, rotor_rate, m_min, m_max)
    u = conditional_shift(m_min, m_max, sign=+1)
    n = window
    umu = np.kron(np.kron(_u_mu_pair(d2a), _u_mu_pair(d2b)), np.eye(n))
    hs = umu @ u @ h @ u.conj().T @ umu.conj().T
    # sector block: states |s, J = jz> in the shifted frame
    idx = [s * n + (jz - m_min) for s in range(4)]
    block = hs[np.ix_(idx, idx)]
    explicit = two_pair_explicit(d2a, d2b, rotor_rate, m, label)
    err = float(np.abs(block - explicit).max())
    pa, pb = np.kron(_MU_P, np.eye(2)), np.kron(np.eye(2), _MU_P)
    ma, mb = pa.conj().T, pb.conj().T
    double = 2 * rotor_rate * (pa @ pb + ma @ mb)
    secular = explicit - double
    local = (math.sqrt(2) * abs(d2a), math.sqrt(2) * abs(d2b))
    regime_ok = min(local) >= 10 * 2 * rotor_rate
    if not regime_ok:
        warnings.warn("double-flip coupling not large compared with hbar/J; transformed form still returned",
                      RuntimeWarning, stacklevel=2)
    return TwoPairResult(
        hamiltonian=block,
        explicit=explicit,
        secular=secular,
        local_fields=local,
        transverse_amplitude=2 * rotor_rate * (1 + jz),
        coupling_amplitude=2 * rotor_rate,
        double_raising_norm=float(np.linalg.norm(double, 2)),
        regime_ok=regime_ok,
        brute_force_error=err,
    )


def to_coo_text(op) -> str:
    """Coordinate-list dump: one 'row col re im' line per stored entry."""
    coo = sparse.coo_matrix(op)
    lines = [f"# shape {coo.shape[0]} {coo.shape[1]} nnz {coo.nnz}"]
    for i, j, v in zip(coo.row, coo.col, coo.data):
        v = complex(v)
        lines.append(f"{i} {j} {v.real:.17g} {v.imag:.17g}")
    return "\n".join(lines) + "\n"
