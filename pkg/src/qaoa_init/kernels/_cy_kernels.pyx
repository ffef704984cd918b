# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels; mirrors _np_kernels function for function."""

from libc.math cimport cos, sin

BACKEND = "cython"

cdef double complex J = 1j


def phase_multiply(double complex[::1] amps, double[::1] table, double gamma):
    cdef Py_ssize_t i, n = amps.shape[0]
    cdef double ph
    with nogil:
        for i in range(n):
            ph = -gamma * table[i]
            amps[i] = amps[i] * (cos(ph) + J * sin(ph))


def phase_multiply_lut(double complex[::1] amps, int[::1] table_idx,
                       double complex[::1] lut):
    cdef Py_ssize_t i, n = amps.shape[0]
    with nogil:
        for i in range(n):
            amps[i] = amps[i] * lut[table_idx[i]]


cdef void _mixer_one_qubit(double complex[::1] amps, Py_ssize_t stride,
                           double c, double s) noexcept nogil:
    cdef Py_ssize_t base = 0, i0, i1, n = amps.shape[0]
    cdef double complex a0, a1
    while base < n:
        for i0 in range(base, base + stride):
            i1 = i0 + stride
            a0 = amps[i0]
            a1 = amps[i1]
            amps[i0] = c * a0 - J * s * a1
            amps[i1] = c * a1 - J * s * a0
        base += 2 * stride


def mixer_apply(double complex[::1] amps, int n_qubits, double beta):
    cdef double c = cos(beta), s = sin(beta)
    cdef int q
    with nogil:
        for q in range(n_qubits):
            _mixer_one_qubit(amps, 1 << q, c, s)


def mixer_apply_single(double complex[::1] amps, int n_qubits, int qubit,
                       double beta):
    cdef double c = cos(beta), s = sin(beta)
    with nogil:
        _mixer_one_qubit(amps, 1 << qubit, c, s)


def mixer_ham_apply(double complex[::1] amps, int n_qubits,
                    double complex[::1] out):
    cdef Py_ssize_t i, i0, i1, base, stride, n = amps.shape[0]
    cdef int q
    with nogil:
        for i in range(n):
            out[i] = 0.0
        for q in range(n_qubits):
            stride = 1 << q
            base = 0
            while base < n:
                for i0 in range(base, base + stride):
                    i1 = i0 + stride
                    out[i0] = out[i0] + amps[i1]
                    out[i1] = out[i1] + amps[i0]
                base += 2 * stride


def expectation(double complex[::1] amps, double[::1] table):
    cdef Py_ssize_t i, n = amps.shape[0]
    cdef double acc = 0.0, re, im
    with nogil:
        for i in range(n):
            re = amps[i].real
            im = amps[i].imag
            acc += (re * re + im * im) * table[i]
    return acc


def weighted_im_dot(double complex[::1] bra, double complex[::1] ket,
                    double[::1] table):
    cdef Py_ssize_t i, n = bra.shape[0]
    cdef double acc = 0.0
    cdef double complex z
    with nogil:
        for i in range(n):
            z = bra[i].conjugate() * ket[i]
            acc += table[i] * z.imag
    return acc


def im_dot(double complex[::1] bra, double complex[::1] ket):
    cdef Py_ssize_t i, n = bra.shape[0]
    cdef double acc = 0.0
    cdef double complex z
    with nogil:
        for i in range(n):
            z = bra[i].conjugate() * ket[i]
            acc += z.imag
    return acc
