"""Truncated Fock-space operators, the lab-frame Hamiltonian and the T, T', T'' unitaries.

Composite ordering is QubitA (x) QubitB (x) ModeA (x) ModeB. Qubit basis index 0
is |e> (sigma_z = +1), index 1 is |g>. A qubit configuration is indexed by
2 q_A + q_B, so configurations run ee, eg, ge, gg, and the composite index is
config * N^2 + n_a * N + n_b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .analytic import derived_constants
from .errors import TruncationTooSmall
from .model import EffectiveParams, ModePrep

CONFIGS = ("ee", "eg", "ge", "gg")
CONFIG_SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
TAIL_TOL = 1e-12
ISING_REL_TOL = 1e-8
CHI_REL_TOL = 1e-6


class Space(str, Enum):
    MODE_A = "ModeA"
    MODE_B = "ModeB"
    QUBIT_A = "QubitA"
    QUBIT_B = "QubitB"
    MODES = "ModeA*ModeB"
    COMPOSITE = "QubitA*QubitB*ModeA*ModeB"


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square complex matrix tagged with the space it acts on."""

    entries: np.ndarray
    space: Space = Space.COMPOSITE

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.space)

    def hermiticity_error(self) -> float:
        return float(np.linalg.norm(self.entries - self.entries.conj().T, 2))

    def unitarity_error(self) -> float:
        m = self.entries
        return float(np.linalg.norm(m @ m.conj().T - np.eye(self.dim), 2))


@dataclass(frozen=True)
class FockSpace:
    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise ValueError(f"Fock truncation must be an integer >= 2, got {self.N!r}")

    @property
    def modes_dim(self) -> int:
        return self.N * self.N

    @property
    def composite_dim(self) -> int:
        return 4 * self.N * self.N


def ladder(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation matrices with <n-1|a|n> = sqrt(n)."""
    FockSpace(N)
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)
    return a, a.conj().T.copy()


def mode_operators(N: int):
    """(a, b) on the two-mode space ModeA (x) ModeB."""
    a, _ = ladder(N)
    eye = np.eye(N)
    return np.kron(a, eye), np.kron(eye, a)


def _sigma_z_diag():
    return np.array([1.0, -1.0])


def config_signs_per_index(N: int):
    """Per composite index: (s_A, s_B, n_a, n_b)."""
    idx = np.arange(4 * N * N)
    cfg, m = np.divmod(idx, N * N)
    na, nb = np.divmod(m, N)
    signs = np.array(CONFIG_SIGNS)
    return signs[cfg, 0], signs[cfg, 1], na, nb


def build_lab_hamiltonian(p: EffectiveParams, N: int) -> Operator:
    """H = w0/2 (szA + szB) + w (a'a + b'b) + lam (a'b + b'a) + g (szA + mu)(a + a') + g (szB + mu)(b + b')."""
    a, ad = ladder(N)
    eye_n = np.eye(N)
    eye2 = np.eye(2)
    sz = np.diag(_sigma_z_diag())
    num = ad @ a
    xa = a + ad
    modes_free = p.omega * (np.kron(num, eye_n) + np.kron(eye_n, num))
    modes_free = modes_free + p.lam * (np.kron(ad, a) + np.kron(a, ad))
    qa = np.kron(sz, eye2)
    qb = np.kron(eye2, sz)
    eye4 = np.eye(4)
    xa_m = np.kron(xa, eye_n)
    xb_m = np.kron(eye_n, xa)
    h = (
        np.kron(0.5 * p.omega0 * (qa + qb), np.eye(N * N))
        + np.kron(eye4, modes_free)
        + p.g * np.kron(qa + p.mu * eye4, xa_m)
        + p.g * np.kron(qb + p.mu * eye4, xb_m)
    )
    return Operator(h.astype(complex), Space.COMPOSITE)


def _expm_antihermitian(gen: np.ndarray) -> np.ndarray:
    """exp(G) for anti-Hermitian G via the eigendecomposition of the Hermitian iG."""
    e, v = np.linalg.eigh(1j * gen)
    return (v * np.exp(-1j * e)) @ v.conj().T


def required_fock_dim(amplitude: float) -> int:
    """ceil(A^2 + 8A + 10): keeps the Poisson tail of |A> beyond N below 1e-12."""
    a = abs(float(amplitude))
    return int(math.ceil(a * a + 8.0 * a + 10.0))


def _check_tail(amplitude: float, N: int, what: str):
    need = required_fock_dim(amplitude)
    if N < need:
        raise TruncationTooSmall(f"{what}: amplitude {amplitude:.6g} needs N >= {need}, got N = {N}")


def _displacement_1mode(xi: complex, N: int) -> np.ndarray:
    a, ad = ladder(N)
    return _expm_antihermitian(xi * ad - np.conj(xi) * a)


def displacement_unitary(xi: complex, N: int) -> Operator:
    """T = D(xi) (x) D(xi) on ModeA (x) ModeB."""
    _check_tail(abs(xi), N, "displacement")
    d = _displacement_1mode(xi, N)
    return Operator(np.kron(d, d), Space.MODES)


def beam_splitter_unitary(N: int) -> Operator:
    """T' = exp[pi/4 (a'b - a b')]; conserves n_a + n_b."""
    FockSpace(N)
    a, b = mode_operators(N)
    gen = (np.pi / 4.0) * (a.conj().T @ b - a @ b.conj().T)
    return Operator(_expm_antihermitian(gen), Space.MODES)


def _polaron_block(c, s_a: int, s_b: int, N: int) -> np.ndarray:
    return np.kron(_displacement_1mode(c.lambda_plus * (s_a + s_b), N),
                   _displacement_1mode(c.lambda_minus * (s_b - s_a), N))


def polaron_unitary(p: EffectiveParams, N: int) -> Operator:
    """T'': qubit-conditioned displacements by lambda_+ (sA + sB) and lambda_- (sB - sA)."""
    c = derived_constants(p)
    _check_tail(2 * c.lambda_plus + 2 * c.lambda_minus, N, "polaron")
    m = N * N
    u = np.zeros((4 * m, 4 * m), dtype=complex)
    for k, (sa, sb) in enumerate(CONFIG_SIGNS):
        u[k * m:(k + 1) * m, k * m:(k + 1) * m] = _polaron_block(c, sa, sb, N)
    return Operator(u, Space.COMPOSITE)


def transformation_unitary(p: EffectiveParams, N: int) -> Operator:
    """U = T'' T' T on the composite space (block diagonal in qubit configuration)."""
    c = derived_constants(p)
    _check_tail(abs(c.xi) + 2 * c.lambda_plus + 2 * c.lambda_minus, N, "transformation")
    d = _displacement_1mode(c.xi, N)
    inner = beam_splitter_unitary(N).entries @ np.kron(d, d)
    m = N * N
    u = np.zeros((4 * m, 4 * m), dtype=complex)
    for k, (sa, sb) in enumerate(CONFIG_SIGNS):
        u[k * m:(k + 1) * m, k * m:(k + 1) * m] = _polaron_block(c, sa, sb, N) @ inner
    return Operator(u, Space.COMPOSITE)


def beam_splitter_mapping(N: int = 12) -> dict:
    """Measured action of T' a T'^dagger and T' b T'^dagger on the ladder operators.

    Returned as {"a": (c_a, c_b), "b": (c_a, c_b)} meaning T' x T'^dag = c_a a + c_b b,
    read off on the low-number subspace.
    """
    u = beam_splitter_unitary(N).entries
    a, b = mode_operators(N)
    out = {}
    for name, op in (("a", a), ("b", b)):
        m = u @ op @ u.conj().T
        # <0,0| . |1,0> and <0,0| . |0,1> isolate the a and b coefficients
        out[name] = (complex(m[0, N]), complex(m[0, 1]))
    return out


@dataclass
class IsingReport:
    N: int
    guard: int
    h_norm: float
    inter_config_max: float
    offdiag_norm: float
    fitted: dict
    expected: dict
    offset: float
    beam_splitter: dict
    unitarity_error: float
    passed_offdiag: bool = False
    passed_chi: bool = False
    passed_coefficients: bool = False
    target_chi: float = field(default=float("nan"))

    @property
    def passed(self) -> bool:
        return self.passed_offdiag and self.passed_chi and self.passed_coefficients

    def to_dict(self) -> dict:
        bs = {k: [[v.real, v.imag] for v in pair] for k, pair in self.beam_splitter.items()}
        return {
            "N": self.N,
            "guard": self.guard,
            "h_norm": self.h_norm,
            "inter_config_max": self.inter_config_max,
            "offdiag_norm": self.offdiag_norm,
            "fitted": dict(self.fitted),
            "expected": dict(self.expected),
            "target_chi": self.target_chi,
            "offset": self.offset,
            "beam_splitter": bs,
            "unitarity_error": self.unitarity_error,
            "passed_offdiag": self.passed_offdiag,
            "passed_chi": self.passed_chi,
            "passed_coefficients": self.passed_coefficients,
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [f"N = {self.N}", f"guard = {self.guard}", f"h_norm = {self.h_norm:.17g}",
                 f"inter_config_max = {self.inter_config_max:.17g}",
                 f"offdiag_norm = {self.offdiag_norm:.17g}"]
        for k in ("omega0_prime", "chi", "omega_plus", "omega_minus"):
            lines.append(f"fitted.{k} = {self.fitted[k]:.17g}")
            lines.append(f"expected.{k} = {self.expected[k]:.17g}")
        lines.append(f"target_chi = {self.target_chi:.17g}")
        lines.append(f"offset = {self.offset:.17g}")
        for k, (ca, cb) in self.beam_splitter.items():
            lines.append(f"beam_splitter.{k} = {ca.real:+.12f} a {cb.real:+.12f} b")
        lines.append(f"unitarity_error = {self.unitarity_error:.3e}")
        lines.append(f"passed_offdiag = {self.passed_offdiag}")
        lines.append(f"passed_chi = {self.passed_chi}")
        lines.append(f"passed_coefficients = {self.passed_coefficients}")
        lines.append(f"passed = {self.passed}")
        return "\n".join(lines) + "\n"


def verify_ising_form(p: EffectiveParams, N: int = 24, guard: int = 6,
                      target: EffectiveParams | None = None) -> IsingReport:
    """Conjugate H by U = T''T'T and check the result is the diagonal Ising form.

    The comparison runs on the subspace n_a + n_b <= N - guard: U conserves
    total excitation number inside each qubit block up to small displacements,
    so this is the region where truncation at N does not leak in. The fitted
    diagonal model is c + w0'(sA+sB)/2 + chi sA sB/2 + w+ n_a + w- n_b; the
    constant c absorbs the c-number terms the transformations generate.
    ``target`` replaces the parameters used for the expected coefficients
    (negative controls).
    """
    if guard < 4:
        raise ValueError("guard must be >= 4")
    if N - guard < 2:
        raise ValueError("guarded subspace is empty; increase N or reduce guard")
    h = build_lab_hamiltonian(p, N).entries
    u = transformation_unitary(p, N).entries
    m = N * N
    s_a, s_b, na, nb = config_signs_per_index(N)
    keep = np.nonzero(na + nb <= N - guard)[0]
    pu = u[keep]
    hp = (pu @ h) @ pu.conj().T

    h_norm = max(float(np.max(np.abs(np.linalg.eigvalsh(h[k * m:(k + 1) * m, k * m:(k + 1) * m]))))
                 for k in range(4))
    cfg = keep // m
    inter = cfg[:, None] != cfg[None, :]
    inter_max = float(np.max(np.abs(hp[inter]))) if inter.any() else 0.0
    diag = np.real(np.diag(hp))
    off = hp - np.diag(np.diag(hp))
    off_norm = float(np.linalg.norm(off))

    sa, sb = s_a[keep], s_b[keep]
    design = np.column_stack([np.ones_like(diag), (sa + sb) / 2.0, sa * sb / 2.0,
                              na[keep].astype(float), nb[keep].astype(float)])
    coef, *_ = np.linalg.lstsq(design, diag, rcond=None)
    fitted = {"omega0_prime": float(coef[1]), "chi": float(coef[2]),
              "omega_plus": float(coef[3]), "omega_minus": float(coef[4])}
    ref = derived_constants(target if target is not None else p)
    expected = {"omega0_prime": ref.omega0_prime, "chi": ref.chi,
                "omega_plus": ref.omega_plus, "omega_minus": ref.omega_minus}

    tol = ISING_REL_TOL * h_norm
    if ref.chi != 0.0:
        chi_ok = abs(fitted["chi"] - ref.chi) <= CHI_REL_TOL * abs(ref.chi)
    else:
        chi_ok = abs(fitted["chi"]) <= 1e-9 * p.omega
    coef_ok = all(abs(fitted[k] - expected[k]) <= tol
                  for k in ("omega0_prime", "omega_plus", "omega_minus"))
    unit_err = float(np.linalg.norm(pu @ pu.conj().T - np.eye(keep.size), 2))
    return IsingReport(
        N=N, guard=guard, h_norm=h_norm, inter_config_max=inter_max, offdiag_norm=off_norm,
        fitted=fitted, expected=expected, offset=float(coef[0]),
        beam_splitter=beam_splitter_mapping(min(N, 12)), unitarity_error=unit_err,
        passed_offdiag=bool(off_norm < tol and inter_max < tol),
        passed_chi=bool(chi_ok), passed_coefficients=bool(coef_ok), target_chi=ref.chi,
    )


# --- initial states ---------------------------------------------------------------

def truncation_amplitude(p: EffectiveParams, prep: ModePrep) -> float:
    """Largest displaced amplitude a mode reaches: amp + |xi| + 2 lambda_+ + 2 lambda_-.

    With lambda = 0 the modes never exchange amplitude, so amp = max(alpha, beta);
    otherwise the normal-mode rotation can move all of it into one mode and
    amp = hypot(alpha, beta).
    """
    c = derived_constants(p)
    amp = max(prep.alpha, prep.beta) if p.lam == 0.0 else math.hypot(prep.alpha, prep.beta)
    return amp + abs(c.xi) + 2.0 * c.lambda_plus + 2.0 * c.lambda_minus


def fock_dim_for(p: EffectiveParams, prep: ModePrep) -> int:
    return required_fock_dim(truncation_amplitude(p, prep))


def coherent_vector(z: complex, N: int, strict: bool = True) -> np.ndarray:
    """Fock coefficients e^{-|z|^2/2} z^n / sqrt(n!) for n < N."""
    n = np.arange(N)
    logs = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-0.5 * abs(z) ** 2 + n * math.log(abs(z)) - 0.5 * logs) if z != 0 else (n == 0) * 1.0
    vec = mag * np.exp(1j * np.angle(z) * n)
    if strict and 1.0 - float(np.vdot(vec, vec).real) > TAIL_TOL:
        raise TruncationTooSmall(f"coherent state |{z}> does not fit in N = {N}")
    return vec.astype(complex)


def poisson_weights(alpha: float, N: int, strict: bool = True) -> np.ndarray:
    n = np.arange(N)
    if alpha == 0.0:
        w = (n == 0).astype(float)
    else:
        w = np.exp(-alpha ** 2 + 2 * n * math.log(alpha) - np.array([math.lgamma(k + 1) for k in n]))
    if strict and 1.0 - float(w.sum()) > TAIL_TOL:
        raise TruncationTooSmall(f"Poisson(|{alpha}|^2) does not fit in N = {N}")
    return w


def mode_density(prep: ModePrep, N: int, strict: bool = True) -> np.ndarray:
    """Initial two-mode density matrix on ModeA (x) ModeB."""
    if prep.is_pure:
        a0, b0 = prep.amplitudes()
        v = np.kron(coherent_vector(a0, N, strict), coherent_vector(b0, N, strict))
        return np.outer(v, v.conj())
    w = np.kron(poisson_weights(prep.alpha, N, strict), poisson_weights(prep.beta, N, strict))
    return np.diag(w).astype(complex)


def qubit_plus_minus(sign: int) -> np.ndarray:
    """|+-><+-| for qubit A in the (e, g) basis; |+-> = (|e> +- |g>)/sqrt(2)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return 0.5 * np.array([[1.0, sign], [sign, 1.0]], dtype=complex)


def initial_joint_state(prep: ModePrep, p: EffectiveParams, N: int, sign: int,
                        strict: bool = True) -> Operator:
    """|+-><+-|_A (x) |g><g|_B (x) rho_modes on the composite space."""
    if strict:
        _check_tail(truncation_amplitude(p, prep), N, "initial state")
    gg = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    rho = np.kron(np.kron(qubit_plus_minus(sign), gg), mode_density(prep, N, strict))
    return Operator(rho, Space.COMPOSITE)
