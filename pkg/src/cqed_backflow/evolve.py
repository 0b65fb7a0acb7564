"""Numerical oracles for the dephasing master equation.

Because H commutes with both sigma_z operators, the joint density matrix
splits into 16 mode-space blocks rho_{s s'} indexed by qubit configurations.
Each block evolves independently:

    rho_{ss'}(t) = e^{-i(H_s + E_s)t} rho_{ss'}(0) e^{+i(H_s' + E_s')t} e^{-gamma d(s,s') t}

where d counts the qubits whose configuration differs. The block propagator
uses exact eigendecomposition exponentials. A fixed-step RK4 integrator on the
full composite space exists to check the block derivation at small N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analytic import Provenance, SigmaSeries
from .errors import StepTooLarge
from .hilbert import (
    CONFIG_SIGNS,
    CONFIGS,
    build_lab_hamiltonian,
    fock_dim_for,
    ladder,
    mode_density,
    qubit_plus_minus,
    truncation_amplitude,
    _check_tail,
)
from .model import TWO_PI, EffectiveParams, ModePrep, SimGrid
from .numerics import fd_step, richardson_derivative

BRUTE_MAX_N = 6
BRUTE_STEPS_PER_PERIOD = 64
_TIME_CHUNK = 2048


def mismatch(s: str, s2: str) -> int:
    """Number of qubits whose state differs between configurations s and s2."""
    return sum(x != y for x, y in zip(s, s2))


@dataclass(eq=False)
class BlockState:
    """The 16 qubit-configuration blocks of a joint density matrix."""

    N: int
    blocks: dict

    def __post_init__(self):
        m = self.N * self.N
        for s in CONFIGS:
            for s2 in CONFIGS:
                blk = self.blocks.get((s, s2))
                if blk is None:
                    self.blocks[(s, s2)] = np.zeros((m, m), dtype=complex)
                elif blk.shape != (m, m):
                    raise ValueError(f"block {(s, s2)} has shape {blk.shape}, expected {(m, m)}")

    def trace(self) -> complex:
        return sum(np.trace(self.blocks[(s, s)]) for s in CONFIGS)

    def hermiticity_error(self) -> float:
        return max(float(np.max(np.abs(self.blocks[(s, s2)] - self.blocks[(s2, s)].conj().T)))
                   for s in CONFIGS for s2 in CONFIGS)

    def to_dense(self) -> np.ndarray:
        m = self.N * self.N
        out = np.zeros((4 * m, 4 * m), dtype=complex)
        for i, s in enumerate(CONFIGS):
            for j, s2 in enumerate(CONFIGS):
                out[i * m:(i + 1) * m, j * m:(j + 1) * m] = self.blocks[(s, s2)]
        return out

    @classmethod
    def from_dense(cls, rho: np.ndarray, N: int) -> "BlockState":
        m = N * N
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4 * m, 4 * m):
            raise ValueError(f"dense state has shape {rho.shape}, expected {(4 * m, 4 * m)}")
        blocks = {(s, s2): rho[i * m:(i + 1) * m, j * m:(j + 1) * m].copy()
                  for i, s in enumerate(CONFIGS) for j, s2 in enumerate(CONFIGS)}
        return cls(N, blocks)

    def __sub__(self, other: "BlockState") -> "BlockState":
        return BlockState(self.N, {k: v - other.blocks[k] for k, v in self.blocks.items()})


@dataclass(frozen=True, eq=False)
class QubitState:
    """2x2 density matrix of qubit A in the (e, g) basis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("qubit state must be 2x2")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("qubit state is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise ValueError("qubit state trace differs from 1")
        object.__setattr__(self, "matrix", m)

    @property
    def coherence(self) -> complex:
        return complex(self.matrix[0, 1])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def conditional_mode_hamiltonians(p: EffectiveParams, N: int):
    """H_s on ModeA (x) ModeB for each configuration, and the qubit energies E_s."""
    a, ad = ladder(N)
    eye = np.eye(N)
    num = ad @ a
    x = a + ad
    free = p.omega * (np.kron(num, eye) + np.kron(eye, num)) + p.lam * (np.kron(ad, a) + np.kron(a, ad))
    xa, xb = np.kron(x, eye), np.kron(eye, x)
    hams, energies = {}, {}
    for s, (sa, sb) in zip(CONFIGS, CONFIG_SIGNS):
        hams[s] = free + p.g * (sa + p.mu) * xa + p.g * (sb + p.mu) * xb
        energies[s] = 0.5 * p.omega0 * (sa + sb)
    return hams, energies


class BlockPropagator:
    """Eigendecompositions of the four H_s, shared by every propagation call."""

    def __init__(self, p: EffectiveParams, N: int):
        self.p = p
        self.N = N
        hams, self.energies = conditional_mode_hamiltonians(p, N)
        self.eig = {s: np.linalg.eigh(h) for s, h in hams.items()}
        self._kernels = {}

    def _unitary(self, s: str, t: float) -> np.ndarray:
        e, v = self.eig[s]
        return (v * np.exp(-1j * (e + self.energies[s]) * t)) @ v.conj().T

    def propagate(self, state: BlockState, t: float) -> BlockState:
        if state.N != self.N:
            raise ValueError("state truncation does not match the propagator")
        us = {s: self._unitary(s, t) for s in CONFIGS}
        out = {}
        for (s, s2), blk in state.blocks.items():
            if not blk.any():
                out[(s, s2)] = blk.copy()
                continue
            damp = math.exp(-self.p.gamma * mismatch(s, s2) * t)
            out[(s, s2)] = damp * (us[s] @ blk @ us[s2].conj().T)
        return BlockState(self.N, out)

    def trace_series(self, block: np.ndarray, s: str, s2: str, times) -> np.ndarray:
        """tr rho_{ss'}(t) for many t without forming the propagated block.

        With H_s = V diag(e) V^dag: tr = sum_ij e^{-i e_i t} K_ij e^{+i e'_j t},
        K = (V^dag R V') o (V'^dag V)^T.
        """
        times = np.asarray(times, dtype=float)
        e1, v1 = self.eig[s]
        e2, v2 = self.eig[s2]
        kern = (v1.conj().T @ block @ v2) * (v2.conj().T @ v1).T
        shift = self.energies[s] - self.energies[s2]
        rate = self.p.gamma * mismatch(s, s2)
        out = np.empty(times.shape, dtype=complex)
        flat_t = times.reshape(-1)
        flat_o = out.reshape(-1)
        for i in range(0, flat_t.size, _TIME_CHUNK):
            tt = flat_t[i:i + _TIME_CHUNK, None]
            left = np.exp(-1j * e1[None, :] * tt)
            right = np.exp(1j * e2[None, :] * tt)
            vals = np.sum((left @ kern) * right, axis=1)
            flat_o[i:i + _TIME_CHUNK] = vals * np.exp((-1j * shift - rate) * tt[:, 0])
        return out


@lru_cache(maxsize=8)
def propagator(p: EffectiveParams, N: int) -> BlockPropagator:
    return BlockPropagator(p, N)


def block_propagate(state0: BlockState, p: EffectiveParams, t: float) -> BlockState:
    return propagator(p, state0.N).propagate(state0, t)


def initial_block_state(prep: ModePrep, p: EffectiveParams, N: int, sign: int,
                        strict: bool = True) -> BlockState:
    """|+-><+-|_A (x) |g><g|_B (x) rho_modes, assembled block by block."""
    if strict:
        _check_tail(truncation_amplitude(p, prep), N, "initial state")
    r = mode_density(prep, N, strict)
    q = qubit_plus_minus(sign)
    # qubit A index 0 = e, 1 = g; qubit B fixed in g
    blocks = {(a + "g", b + "g"): q[i, j] * r for i, a in enumerate("eg") for j, b in enumerate("eg")}
    return BlockState(N, blocks)


def _commutator_rhs(h, zs, gamma):
    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for z in zs:
            out += 0.5 * gamma * (z @ rho @ z - rho)
        return out
    return rhs


def brute_force_lindblad(state0, p: EffectiveParams, t: float, dt: float) -> np.ndarray:
    """RK4 with a fixed step on the full composite space (N <= 6)."""
    rho = np.asarray(getattr(state0, "entries", state0), dtype=complex)
    dim = rho.shape[0]
    N = int(round(math.sqrt(dim / 4)))
    if 4 * N * N != dim:
        raise ValueError(f"composite dimension {dim} is not 4 N^2")
    if N > BRUTE_MAX_N:
        raise ValueError(f"brute-force integrator is limited to N <= {BRUTE_MAX_N}, got {N}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    limit = TWO_PI / p.omega / BRUTE_STEPS_PER_PERIOD
    if dt > limit:
        raise StepTooLarge(f"dt = {dt:.3g} ns exceeds (2pi/omega)/64 = {limit:.3g} ns")
    if t < 0:
        raise ValueError("t must be non-negative")
    h = build_lab_hamiltonian(p, N).entries
    sz = np.diag([1.0, -1.0])
    za = np.kron(np.kron(sz, np.eye(2)), np.eye(N * N))
    zb = np.kron(np.kron(np.eye(2), sz), np.eye(N * N))
    rhs = _commutator_rhs(h, (za, zb), p.gamma)
    steps = int(math.ceil(t / dt - 1e-12)) if t > 0 else 0
    if steps == 0:
        return rho.copy()
    h_step = t / steps
    for _ in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h_step * k1)
        k3 = rhs(rho + 0.5 * h_step * k2)
        k4 = rhs(rho + h_step * k3)
        rho = rho + (h_step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def _reduce_matrix(state: BlockState) -> np.ndarray:
    b = state.blocks
    ee = np.trace(b[("ee", "ee")]) + np.trace(b[("eg", "eg")])
    gg = np.trace(b[("ge", "ge")]) + np.trace(b[("gg", "gg")])
    eg = np.trace(b[("ee", "ge")]) + np.trace(b[("eg", "gg")])
    return np.array([[ee, eg], [np.conj(eg), gg]], dtype=complex)


def reduce_qubit_A(state: BlockState) -> QubitState:
    """Trace out qubit B and both modes."""
    return QubitState(_reduce_matrix(state))


def half_trace_norm(delta) -> np.ndarray:
    """1/2 sum |eigenvalues| of Hermitian 2x2 matrices (batched over leading axes)."""
    d = np.asarray(delta, dtype=complex)
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(d)), axis=-1)


def trace_distance(rho1, rho2):
    """D = Tr|rho1 - rho2| / 2 for QubitState values or stacks of 2x2 arrays."""
    m1 = rho1.matrix if isinstance(rho1, QubitState) else np.asarray(rho1)
    m2 = rho2.matrix if isinstance(rho2, QubitState) else np.asarray(rho2)
    out = half_trace_norm(m1 - m2)
    return float(out) if np.ndim(out) == 0 else out


def reduced_series(prop: BlockPropagator, state0: BlockState, times) -> np.ndarray:
    """Qubit-A reduced matrices (T, 2, 2) of a (possibly traceless) state at many times.

    Diagonal blocks keep their trace under unitary conjugation, so only the
    two coherence blocks need time series.
    """
    times = np.asarray(times, dtype=float)
    b = state0.blocks
    out = np.zeros(times.shape + (2, 2), dtype=complex)
    ee = np.trace(b[("ee", "ee")]) + np.trace(b[("eg", "eg")])
    gg = np.trace(b[("ge", "ge")]) + np.trace(b[("gg", "gg")])
    eg = np.zeros(times.shape, dtype=complex)
    for s, s2 in (("ee", "ge"), ("eg", "gg")):
        if b[(s, s2)].any():
            eg = eg + prop.trace_series(b[(s, s2)], s, s2, times)
    out[..., 0, 0] = ee
    out[..., 1, 1] = gg
    out[..., 0, 1] = eg
    out[..., 1, 0] = np.conj(eg)
    return out


def oracle_fock_dim(p: EffectiveParams, prep: ModePrep, grid: SimGrid) -> int:
    if grid.fock_dim is not None:
        _check_tail(truncation_amplitude(p, prep), grid.fock_dim, "oracle grid")
        return grid.fock_dim
    return fock_dim_for(p, prep)


def trace_distance_function(p: EffectiveParams, prep: ModePrep, N: int):
    """t -> D[rho_+^A(t), rho_-^A(t)] from the block oracle (vectorised in t)."""
    prop = propagator(p, N)
    delta = initial_block_state(prep, p, N, +1) - initial_block_state(prep, p, N, -1)

    def d_func(tt):
        return half_trace_norm(reduced_series(prop, delta, tt))

    return d_func


def sigma_numeric(p: EffectiveParams, prep: ModePrep, grid: SimGrid) -> SigmaSeries:
    """Block-oracle trace distance and its Richardson-differenced derivative.

    PhaseDiffused preparations enter as Poissonian diagonal Fock mixtures.
    """
    N = oracle_fock_dim(p, prep, grid)
    d_func = trace_distance_function(p, prep, N)
    t = grid.times
    d = d_func(t)
    sigma = richardson_derivative(d_func, t, fd_step(p))
    return SigmaSeries(times=t, trace_distance=d, sigma=sigma, provenance=Provenance.ORACLE_BLOCK)
