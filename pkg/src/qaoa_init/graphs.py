"""Max-Cut instances on Erdos-Renyi graphs, cut evaluation and the exact
brute-force optimum used as the benchmark denominator.

Basis-state convention used across the whole toolkit: vertex 0 is the least
significant bit of a computational-basis index, and bit b maps to the spin
label z = 1 - 2b (bit 0 -> +1, bit 1 -> -1).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ResourceLimitError
from .rng import StableRng

EDGE_WEIGHT = 1.0  # all instances are unweighted
MAX_NODES = 24  # statevector feasibility bound
_EMPTY_RETRIES = 64


class UnsatisfiableInstanceError(RuntimeError):
    """Edge sampling kept producing empty graphs (p too small)."""


@dataclass(frozen=True)
class Graph:
    """Undirected unit-weight graph; `edges` are (i, j) pairs with i < j."""

    n_nodes: int
    edges: tuple

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one vertex")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < j < self.n_nodes):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n_nodes}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @property
    def n_edges(self):
        return len(self.edges)


@dataclass(frozen=True)
class MaxCutResult:
    c_max: float
    witnesses: tuple  # label tuples (+1/-1 per vertex), vertex 0 fixed to +1


def generate_erdos_renyi(n, p, seed):
    """Sample G(n, p) deterministically from `seed`.

    Candidate edges are visited in lexicographic order and included when the
    next SplitMix64 double is < p. Empty samples are rejected and resampled
    with seed+1 (bounded retries) so the max-cut denominator is never zero.
    """
    if not (2 <= n <= MAX_NODES):
        raise ValueError(f"n must be in [2, {MAX_NODES}], got {n}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must be in [0, 1], got {p}")
    for attempt in range(_EMPTY_RETRIES):
        rng = StableRng(int(seed) + attempt)
        edges = [
            (i, j)
            for i in range(n - 1)
            for j in range(i + 1, n)
            if rng.random() < p
        ]
        if edges:
            return Graph(n, tuple(edges))
    raise UnsatisfiableInstanceError(
        f"no edges after {_EMPTY_RETRIES} resampling attempts (n={n}, p={p})"
    )


def cut_value(g, labels):
    """C(z) = (1/2) * sum over edges of w_ij * (1 - z_i z_j)."""
    if len(labels) != g.n_nodes:
        raise ValueError(f"expected {g.n_nodes} labels, got {len(labels)}")
    for z in labels:
        if z not in (1, -1):
            raise ValueError(f"labels must be +1/-1, got {z}")
    total = 0.0
    for i, j in g.edges:
        total += EDGE_WEIGHT * 0.5 * (1.0 - labels[i] * labels[j])
    return total


def _edge_xor_bits(edge, indices):
    i, j = edge
    return ((indices >> i) ^ (indices >> j)) & 1


def basis_cut_table(g):
    """Cut value of every computational basis state (diagonal of H_C)."""
    if g.n_nodes > MAX_NODES:
        raise ResourceLimitError(f"n={g.n_nodes} exceeds {MAX_NODES}")
    indices = np.arange(1 << g.n_nodes, dtype=np.int64)
    table = np.zeros(indices.shape[0], dtype=np.float64)
    for edge in g.edges:
        table += EDGE_WEIGHT * _edge_xor_bits(edge, indices)
    return table


def brute_force_max_cut(g):
    """Exact optimum by enumerating the 2^(N-1) partitions with vertex 0

    pinned to +1 (the z -> -z flip halves the search space). Returns every
    optimal assignment up to that symmetry.
    """
    if g.n_nodes > MAX_NODES:
        raise ResourceLimitError(f"n={g.n_nodes} exceeds {MAX_NODES}")
    # bit 0 = 0 always: enumerate the remaining n-1 bits
    indices = np.arange(1 << (g.n_nodes - 1), dtype=np.int64) << 1
    values = np.zeros(indices.shape[0], dtype=np.float64)
    for edge in g.edges:
        values += EDGE_WEIGHT * _edge_xor_bits(edge, indices)
    c_max = float(values.max())
    witnesses = tuple(
        assignment_from_index(int(b), g.n_nodes)
        for b in indices[values == c_max]
    )
    return MaxCutResult(c_max=c_max, witnesses=witnesses)


def assignment_from_index(index, n_nodes):
    """Basis index -> spin labels, vertex 0 at the least significant bit."""
    return tuple(1 - 2 * ((index >> i) & 1) for i in range(n_nodes))


@lru_cache(maxsize=32)
def max_cut_value(g):
    return brute_force_max_cut(g).c_max


def save_graph(g, path):
    """Text format: first line "n m", then m lines "i j", edges sorted."""
    with open(path, "w") as fh:
        fh.write(f"{g.n_nodes} {g.n_edges}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


def load_graph(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header")
        n, m = int(header[0]), int(header[1])
        edges = []
        for _ in range(m):
            parts = fh.readline().split()
            if len(parts) != 2:
                raise ValueError(f"{path}: expected {m} edge lines")
            edges.append((int(parts[0]), int(parts[1])))
    return Graph(n, tuple(edges))
