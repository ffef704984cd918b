"""Noise-free statevector engine for Max-Cut QAOA.

State preparation, cost/mixer layers, expectation values, exact gradients and
the approximation ratio. The cost layer is applied as a diagonal phase over
the precomputed basis cut table, which is mathematically identical to the
CNOT/RZ/CNOT gate decomposition of exp(-i*gamma*H_C) but costs O(2^N) per
layer. Public layer operations are value-in/value-out; the optimization paths
reuse in-place kernels on private buffers.

Gradient methods:
  adjoint           exact reverse-mode sweep, O(L) layer applications total;
                    the default inside optimization loops.
  parameter-shift   exact two-point shifts: per-qubit (+-pi/4, prefactor 1)
                    for mixer angles, per-edge (+-pi/2, prefactor 1/2) for
                    cost angles (each edge term is a projector phase, so the
                    whole-layer two-point rule does not apply).
  finite-difference central differences, h = 1e-5, every coordinate.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ResourceLimitError
from .graphs import MAX_NODES, basis_cut_table
from .rng import StableRng

FD_STEP = 1e-5

GAMMA_PERIOD = 2.0 * math.pi  # integer cut spectrum
BETA_PERIOD = math.pi  # single-qubit mixer, up to global phase


@dataclass(frozen=True)
class QaoaParams:
    """Depth-L angle schedule; gammas/betas are unconstrained reals."""

    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=np.float64)
        b = np.asarray(self.betas, dtype=np.float64)
        if g.ndim != 1 or b.ndim != 1 or g.shape != b.shape:
            raise ValueError("gammas and betas must be 1-D and equally long")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def depth(self):
        return self.gammas.shape[0]

    def flatten(self):
        """[gamma_1..gamma_L, beta_1..beta_L]."""
        return np.concatenate([self.gammas, self.betas])

    @classmethod
    def from_flat(cls, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape[0] % 2 != 0:
            raise ValueError("flat parameter vector must have even length")
        depth = flat.shape[0] // 2
        return cls(gammas=flat[:depth].copy(), betas=flat[depth:].copy())


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray  # complex128, length 2^n_qubits

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return StateVector(self.n_qubits, self.amplitudes.copy())


@dataclass(frozen=True)
class EnergyGradient:
    d_gamma: np.ndarray
    d_beta: np.ndarray

    def flatten(self):
        return np.concatenate([self.d_gamma, self.d_beta])


def random_params(depth, seed):
    """Uniform start on the canonical domain: gamma in [0, 2pi), beta in [0, pi).

    All gammas are drawn before all betas so every consumer of a given seed
    sees the same draw.
    """
    rng = StableRng(seed)
    gammas = rng.uniform_array(0.0, GAMMA_PERIOD, depth)
    betas = rng.uniform_array(0.0, BETA_PERIOD, depth)
    return QaoaParams(gammas=gammas, betas=betas)


def wrap_canonical(params):
    """Wrap angles into gamma in [0, 2pi), beta in [0, pi) for reporting."""
    return QaoaParams(
        gammas=np.mod(params.gammas, GAMMA_PERIOD),
        betas=np.mod(params.betas, BETA_PERIOD),
    )


def mirror_canonical(params):
    """Collapse the exact expectation symmetries onto one representative:

    - beta -> beta + pi/2 per layer (a pi/2 X-rotation on all qubits is
      (-i)^N times the global bit flip, which commutes through the
      flip-symmetric cut phases), so beta is reduced mod pi/2;
    - time reversal E(g, b) = E(-g, -b), resolved by gamma_1 <= pi.

    Keeps the energy exactly. Optima come in aliased families under these
    maps; regression features and targets must live on a single
    representative or the MSE averages across families.
    """
    gammas = np.mod(params.gammas, GAMMA_PERIOD)
    betas = np.mod(params.betas, 0.5 * math.pi)
    if gammas.shape[0] == 0 or gammas[0] <= math.pi:
        return QaoaParams(gammas=gammas, betas=betas)
    return QaoaParams(
        gammas=np.mod(-params.gammas, GAMMA_PERIOD),
        betas=np.mod(-params.betas, 0.5 * math.pi),
    )


@lru_cache(maxsize=32)
def _tables(g):
    """(float64 cut table, int32 cut table) for the diagonal phase LUT."""
    table = basis_cut_table(g)
    return table, table.astype(np.int32)


@lru_cache(maxsize=8)
def _edge_tables(g):
    """Per-edge 0/1 crossing indicators (int32), for per-edge shifts."""
    indices = np.arange(1 << g.n_nodes, dtype=np.int64)
    return tuple(
        (((indices >> i) ^ (indices >> j)) & 1).astype(np.int32)
        for i, j in g.edges
    )


def _phase_lut(gamma, size):
    return np.exp(-1j * gamma * np.arange(size, dtype=np.float64))


def prepare_uniform_state(n):
    """|+>^n: every amplitude 2^(-n/2)."""
    if not (1 <= n <= MAX_NODES):
        raise ResourceLimitError(f"n must be in [1, {MAX_NODES}], got {n}")
    dim = 1 << n
    amps = np.full(dim, 2.0 ** (-n / 2.0), dtype=np.complex128)
    return StateVector(n, amps)


def apply_cost_layer(state, cut_table, gamma):
    """Multiply amplitude b by exp(-i * gamma * cut_table[b])."""
    cut_table = np.asarray(cut_table, dtype=np.float64)
    if cut_table.shape[0] != state.amplitudes.shape[0]:
        raise ValueError("cut table length must equal the state dimension")
    out = state.amplitudes.copy()
    kernels.phase_multiply(out, cut_table, float(gamma))
    return StateVector(state.n_qubits, out)


def apply_mixer_layer(state, beta):
    """exp(-i*beta*X) on every qubit."""
    out = state.amplitudes.copy()
    kernels.mixer_apply(out, state.n_qubits, float(beta))
    return StateVector(state.n_qubits, out)


def _evolve_amps(g, params):
    """In-place evolution on a fresh buffer; returns the raw amplitudes."""
    amps = prepare_uniform_state(g.n_nodes).amplitudes
    if params.depth == 0:
        return amps
    _, table_int = _tables(g)
    lut_size = g.n_edges + 1
    for gamma, beta in zip(params.gammas, params.betas):
        kernels.phase_multiply_lut(amps, table_int, _phase_lut(gamma, lut_size))
        kernels.mixer_apply(amps, g.n_nodes, float(beta))
    return amps


def evolve(g, params):
    """Alternating cost/mixer layers on |+>^N, cost first in each layer."""
    return StateVector(g.n_nodes, _evolve_amps(g, params))


def expectation(state, cut_table):
    """<state| H_C |state> = sum_b |amp_b|^2 * cut_table[b]."""
    cut_table = np.asarray(cut_table, dtype=np.float64)
    if cut_table.shape[0] != state.amplitudes.shape[0]:
        raise ValueError("cut table length must equal the state dimension")
    return kernels.expectation(state.amplitudes, cut_table)


def energy(g, params):
    """expectation(evolve(g, params)) without rebuilding tables."""
    table, _ = _tables(g)
    return kernels.expectation(_evolve_amps(g, params), table)


def approximation_ratio(energy_value, c_max):
    if c_max <= 0:
        raise ValueError(f"c_max must be positive, got {c_max}")
    return energy_value / c_max


def gradient(g, params, method="adjoint"):
    """Gradient of energy(g, params) with respect to every angle."""
    if params.depth < 1:
        raise ValueError("gradient needs depth >= 1")
    if method == "adjoint":
        return _gradient_adjoint(g, params)
    if method == "parameter-shift":
        return _gradient_parameter_shift(g, params)
    if method == "finite-difference":
        return _gradient_finite_difference(g, params)
    raise ValueError(f"unknown gradient method {method!r}")


def _gradient_adjoint(g, params):
    """Reverse sweep: dE/dbeta_l = 2 Im <bra_l|H_M|s_l> and
    dE/dgamma_l = 2 Im <bra'_l|H_C|u_l>, where bra carries H_C|phi> pulled
    back through the inverse layers and s_l/u_l are the forward states after
    layer l / after the cost half of layer l.
    """
    table, table_int = _tables(g)
    n = g.n_nodes
    depth = params.depth
    lut_size = g.n_edges + 1
    ket = _evolve_amps(g, params)
    bra = ket * table
    scratch = np.empty_like(ket)
    d_gamma = np.zeros(depth)
    d_beta = np.zeros(depth)
    for l in range(depth - 1, -1, -1):
        beta = float(params.betas[l])
        gamma = float(params.gammas[l])
        kernels.mixer_ham_apply(ket, n, scratch)
        d_beta[l] = 2.0 * kernels.im_dot(bra, scratch)
        kernels.mixer_apply(ket, n, -beta)
        kernels.mixer_apply(bra, n, -beta)
        d_gamma[l] = 2.0 * kernels.weighted_im_dot(bra, ket, table)
        inverse_lut = _phase_lut(-gamma, lut_size)
        kernels.phase_multiply_lut(ket, table_int, inverse_lut)
        kernels.phase_multiply_lut(bra, table_int, inverse_lut)
    return EnergyGradient(d_gamma=d_gamma, d_beta=d_beta)


def _energy_shifted(g, params, layer, qubit=None, edge_table=None, shift=0.0):
    """Energy with one extra rotation inserted at `layer`.

    qubit set:      extra exp(-i*shift*X_qubit) after that layer's mixer.
    edge_table set: extra exp(-i*shift*c_e) after that layer's cost phase.
    """
    table, table_int = _tables(g)
    n = g.n_nodes
    lut_size = g.n_edges + 1
    amps = prepare_uniform_state(n).amplitudes
    shift_lut = np.exp(-1j * shift * np.arange(2, dtype=np.float64))
    for l, (gamma, beta) in enumerate(zip(params.gammas, params.betas)):
        kernels.phase_multiply_lut(amps, table_int, _phase_lut(gamma, lut_size))
        if l == layer and edge_table is not None:
            kernels.phase_multiply_lut(amps, edge_table, shift_lut)
        kernels.mixer_apply(amps, n, float(beta))
        if l == layer and qubit is not None:
            kernels.mixer_apply_single(amps, n, qubit, shift)
    return kernels.expectation(amps, table)


def _gradient_parameter_shift(g, params):
    depth = params.depth
    d_gamma = np.zeros(depth)
    d_beta = np.zeros(depth)
    edge_tables = _edge_tables(g)
    for l in range(depth):
        for q in range(g.n_nodes):
            plus = _energy_shifted(g, params, l, qubit=q, shift=math.pi / 4)
            minus = _energy_shifted(g, params, l, qubit=q, shift=-math.pi / 4)
            d_beta[l] += plus - minus
        for et in edge_tables:
            plus = _energy_shifted(g, params, l, edge_table=et, shift=math.pi / 2)
            minus = _energy_shifted(g, params, l, edge_table=et, shift=-math.pi / 2)
            d_gamma[l] += 0.5 * (plus - minus)
    return EnergyGradient(d_gamma=d_gamma, d_beta=d_beta)


def _gradient_finite_difference(g, params, h=FD_STEP):
    flat = params.flatten()
    grad = np.zeros_like(flat)
    for k in range(flat.shape[0]):
        bumped = flat.copy()
        bumped[k] += h
        e_plus = energy(g, QaoaParams.from_flat(bumped))
        bumped[k] -= 2.0 * h
        e_minus = energy(g, QaoaParams.from_flat(bumped))
        grad[k] = (e_plus - e_minus) / (2.0 * h)
    depth = params.depth
    return EnergyGradient(d_gamma=grad[:depth], d_beta=grad[depth:])
