"""NumPy implementation of the statevector hot loops (fallback backend).

All functions operate in place on a contiguous complex128 amplitude array of
length 2^n, qubit q living at bit q of the basis index.
"""

import math

import numpy as np

BACKEND = "numpy"


def phase_multiply(amps, table, gamma):
    """amps[b] *= exp(-i * gamma * table[b])."""
    amps *= np.exp((-1j * gamma) * table)


def phase_multiply_lut(amps, table_idx, lut):
    """amps[b] *= lut[table_idx[b]] (integer cut tables index a phase LUT)."""
    amps *= lut[table_idx]


def mixer_apply(amps, n_qubits, beta):
    """exp(-i*beta*X) on every qubit: [[c, -is], [-is, c]] with c=cos, s=sin."""
    c = math.cos(beta)
    s = math.sin(beta)
    for q in range(n_qubits):
        a = amps.reshape(-1, 2, 1 << q)
        a0 = a[:, 0, :].copy()
        a[:, 0, :] = c * a0 - 1j * s * a[:, 1, :]
        a[:, 1, :] = c * a[:, 1, :] - 1j * s * a0


def mixer_apply_single(amps, n_qubits, qubit, beta):
    """exp(-i*beta*X) on one qubit only (parameter-shift helper)."""
    c = math.cos(beta)
    s = math.sin(beta)
    a = amps.reshape(-1, 2, 1 << qubit)
    a0 = a[:, 0, :].copy()
    a[:, 0, :] = c * a0 - 1j * s * a[:, 1, :]
    a[:, 1, :] = c * a[:, 1, :] - 1j * s * a0


def mixer_ham_apply(amps, n_qubits, out):
    """out = (sum_q X_q) amps, i.e. out[b] = sum_q amps[b ^ (1<<q)]."""
    out[:] = 0.0
    for q in range(n_qubits):
        a = amps.reshape(-1, 2, 1 << q)
        o = out.reshape(-1, 2, 1 << q)
        o[:, 0, :] += a[:, 1, :]
        o[:, 1, :] += a[:, 0, :]


def expectation(amps, table):
    """sum_b |amps[b]|^2 * table[b]."""
    return float(np.dot(amps.real**2 + amps.imag**2, table))


def weighted_im_dot(bra, ket, table):
    """Im sum_b conj(bra[b]) * table[b] * ket[b]."""
    return float(np.imag(np.vdot(bra, table * ket)))


def im_dot(bra, ket):
    """Im sum_b conj(bra[b]) * ket[b]."""
    return float(np.imag(np.vdot(bra, ket)))
