"""GRU meta-optimizer for depth-1 QAOA parameters.

The cell follows the gated-recurrent-unit equations with an extra bias vector
d on every gate:

    z_t  = sigmoid(W_z x + R_z h + b_z + d_z)
    r_t  = sigmoid(W_r x + R_r h + b_r + d_r)
    hbar = tanh(W_h x + r_t * (R_h h + d_h) + b_h)
    h'   = z_t * h + (1 - z_t) * hbar

The step input is x_t = (theta_t, E_t / e_scale) with e_scale the edge count
of the episode's graph, and the proposal is read out residually,
theta_{t+1} = theta_t + W_out h_{t+1} + b_out, so a zero-initialized network
is the identity optimizer. Training minimizes the negated cumulative clipped
improvement of the episode energies, with gradients backpropagated through
the unrolled episode and through the quantum expectation itself.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .optimizers import make_optimizer, optimizer_step
from .rng import StableRng, derive_seed
from .simulator import QaoaParams, energy, gradient, random_params

PARAM_DIM = 2  # depth-1 (gamma, beta)

_WEIGHT_FIELDS = (
    "w_z", "w_r", "w_h",
    "r_z", "r_r", "r_h",
    "b_z", "b_r", "b_h",
    "d_z", "d_r", "d_h",
    "w_out", "b_out",
)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class GruWeights:
    w_z: np.ndarray  # (H, input_dim)
    w_r: np.ndarray
    w_h: np.ndarray
    r_z: np.ndarray  # (H, H)
    r_r: np.ndarray
    r_h: np.ndarray
    b_z: np.ndarray  # (H,)
    b_r: np.ndarray
    b_h: np.ndarray
    d_z: np.ndarray
    d_r: np.ndarray
    d_h: np.ndarray
    w_out: np.ndarray  # (param_dim, H)
    b_out: np.ndarray  # (param_dim,)

    def __post_init__(self):
        h = self.hidden_dim
        d = self.input_dim
        if self.input_dim != self.param_dim + 1:
            raise ValueError("input_dim must be param_dim + 1")
        for name in ("w_z", "w_r", "w_h"):
            if getattr(self, name).shape != (h, d):
                raise ValueError(f"{name} must have shape ({h}, {d})")
        for name in ("r_z", "r_r", "r_h"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"{name} must have shape ({h}, {h})")
        for name in ("b_z", "b_r", "b_h", "d_z", "d_r", "d_h"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} must have shape ({h},)")
        if self.b_out.shape != (self.param_dim,):
            raise ValueError("b_out shape mismatch")

    @property
    def hidden_dim(self):
        return self.w_z.shape[0]

    @property
    def input_dim(self):
        return self.w_z.shape[1]

    @property
    def param_dim(self):
        return self.w_out.shape[0]

    def copy(self):
        return GruWeights(**{f: getattr(self, f).copy() for f in _WEIGHT_FIELDS})

    def to_flat(self):
        return np.concatenate([getattr(self, f).ravel() for f in _WEIGHT_FIELDS])

    @classmethod
    def from_flat(cls, flat, hidden_dim, param_dim=PARAM_DIM):
        shapes = _weight_shapes(hidden_dim, param_dim)
        values = {}
        offset = 0
        for name in _WEIGHT_FIELDS:
            size = int(np.prod(shapes[name]))
            values[name] = flat[offset:offset + size].reshape(shapes[name]).copy()
            offset += size
        if offset != flat.shape[0]:
            raise ValueError("flat vector length mismatch")
        return cls(**values)

    def as_arrays(self):
        return {f: getattr(self, f) for f in _WEIGHT_FIELDS}


def _weight_shapes(hidden_dim, param_dim):
    input_dim = param_dim + 1
    shapes = {}
    for name in ("w_z", "w_r", "w_h"):
        shapes[name] = (hidden_dim, input_dim)
    for name in ("r_z", "r_r", "r_h"):
        shapes[name] = (hidden_dim, hidden_dim)
    for name in ("b_z", "b_r", "b_h", "d_z", "d_r", "d_h"):
        shapes[name] = (hidden_dim,)
    shapes["w_out"] = (param_dim, hidden_dim)
    shapes["b_out"] = (param_dim,)
    return shapes


def init_gru_weights(hidden_dim=32, param_dim=PARAM_DIM, scale=0.08, seed=0):
    """Uniform(-scale, scale) entries, drawn from the stable stream."""
    rng = StableRng(seed)
    shapes = _weight_shapes(hidden_dim, param_dim)
    values = {
        name: rng.uniform_array(-scale, scale, int(np.prod(shape))).reshape(shape)
        for name, shape in shapes.items()
    }
    return GruWeights(**values)


def zero_gru_weights(hidden_dim=32, param_dim=PARAM_DIM):
    shapes = _weight_shapes(hidden_dim, param_dim)
    return GruWeights(**{n: np.zeros(s) for n, s in shapes.items()})


def _cell_forward(w, x, h_prev):
    a_z = w.w_z @ x + w.r_z @ h_prev + w.b_z + w.d_z
    z = _sigmoid(a_z)
    a_r = w.w_r @ x + w.r_r @ h_prev + w.b_r + w.d_r
    r = _sigmoid(a_r)
    inner = w.r_h @ h_prev + w.d_h
    hbar = np.tanh(w.w_h @ x + r * inner + w.b_h)
    h = z * h_prev + (1.0 - z) * hbar
    cache = (x, h_prev, z, r, inner, hbar)
    return h, cache


def _cell_backward(w, cache, gh, grads):
    """Accumulate weight gradients for one cell; returns (gx, gh_prev)."""
    x, h_prev, z, r, inner, hbar = cache
    gz = gh * (h_prev - hbar)
    ghbar = gh * (1.0 - z)
    gh_prev = gh * z
    ga_h = ghbar * (1.0 - hbar**2)
    grads["w_h"] += np.outer(ga_h, x)
    grads["b_h"] += ga_h
    gr = ga_h * inner
    ginner = ga_h * r
    grads["r_h"] += np.outer(ginner, h_prev)
    grads["d_h"] += ginner
    gh_prev += w.r_h.T @ ginner
    gx = w.w_h.T @ ga_h
    ga_r = gr * r * (1.0 - r)
    grads["w_r"] += np.outer(ga_r, x)
    grads["r_r"] += np.outer(ga_r, h_prev)
    grads["b_r"] += ga_r
    grads["d_r"] += ga_r
    gx += w.w_r.T @ ga_r
    gh_prev += w.r_r.T @ ga_r
    ga_z = gz * z * (1.0 - z)
    grads["w_z"] += np.outer(ga_z, x)
    grads["r_z"] += np.outer(ga_z, h_prev)
    grads["b_z"] += ga_z
    grads["d_z"] += ga_z
    gx += w.w_z.T @ ga_z
    gh_prev += w.r_z.T @ ga_z
    return gx, gh_prev


def gru_cell_forward(w, x, h_prev):
    """One cell update; x has param_dim+1 entries, h_prev has hidden_dim."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape != (w.input_dim,):
        raise ValueError(f"x must have shape ({w.input_dim},)")
    if h_prev.shape != (w.hidden_dim,):
        raise ValueError(f"h_prev must have shape ({w.hidden_dim},)")
    h, _ = _cell_forward(w, x, h_prev)
    return h


def gru_meta_step(w, theta, energy_value, h, e_scale=1.0):
    """(theta_next, h_next) from the current iterate and its energy."""
    theta = np.asarray(theta, dtype=np.float64)
    x = np.concatenate([theta, [energy_value / e_scale]])
    h_next = gru_cell_forward(w, x, h)
    theta_next = theta + w.w_out @ h_next + w.b_out
    return theta_next, h_next


@dataclass
class MetaEpisode:
    thetas: np.ndarray  # (T+1, param_dim)
    energies: np.ndarray  # (T+1,)
    hiddens: np.ndarray  # (T+1, hidden_dim)

    @property
    def horizon(self):
        return self.thetas.shape[0] - 1

    @property
    def best_index(self):
        return int(np.argmax(self.energies))

    @property
    def best_energy(self):
        return float(self.energies[self.best_index])

    @property
    def best_params(self):
        return QaoaParams.from_flat(self.thetas[self.best_index])


def _rollout(w, g, theta0, horizon, feed_initial_input=False):
    """Unrolled episode; returns the episode plus per-step cell caches."""
    e_scale = float(g.n_edges)
    hidden_dim = w.hidden_dim
    thetas = np.zeros((horizon + 1, w.param_dim))
    energies = np.zeros(horizon + 1)
    hiddens = np.zeros((horizon + 1, hidden_dim))
    caches = []
    thetas[0] = theta0
    x0 = None
    for t in range(horizon):
        energies[t] = energy(g, QaoaParams.from_flat(thetas[t]))
        x_t = np.concatenate([thetas[t], [energies[t] / e_scale]])
        if feed_initial_input:
            if x0 is None:
                x0 = x_t
            x_t = x0
        h_next, cache = _cell_forward(w, x_t, hiddens[t])
        caches.append(cache)
        hiddens[t + 1] = h_next
        thetas[t + 1] = thetas[t] + w.w_out @ h_next + w.b_out
    energies[horizon] = energy(g, QaoaParams.from_flat(thetas[horizon]))
    episode = MetaEpisode(thetas=thetas, energies=energies, hiddens=hiddens)
    return episode, caches


def run_episode(w, g, seed, horizon, feed_initial_input=False):
    """Roll the meta-optimizer from a seeded random start.

    The proposal is the iterate with the best recorded energy.
    feed_initial_input=True replays the first input at every step instead of
    the current iterate (the alternative reading of the cell equations).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    theta0 = random_params(1, seed).flatten()
    episode, _ = _rollout(w, g, theta0, horizon, feed_initial_input)
    return episode


def gru_loss(episode):
    """Negated cumulative clipped improvement of the episode energies.

    G = sum_t max(E_t - max_{i<t} E_i, 0); returns -G, so more improvement
    means lower loss. Always <= 0; 0 iff no step improves on the running
    best. (G telescopes to max_t E_t - E_0.)
    """
    energies = np.asarray(episode.energies, dtype=np.float64)
    if energies.shape[0] < 2:
        raise ValueError("episode needs at least two energy records")
    best = energies[0]
    gain = 0.0
    for e in energies[1:]:
        if e > best:
            gain += e - best
            best = e
    return -gain


def _loss_energy_subgrad(energies):
    """d(loss)/dE_t; credit moves to the latest running-best energy."""
    d_gain = np.zeros(energies.shape[0])
    best = energies[0]
    best_idx = 0
    for t in range(1, energies.shape[0]):
        if energies[t] > best:
            d_gain[t] += 1.0
            d_gain[best_idx] -= 1.0
            best = energies[t]
            best_idx = t
    return -d_gain


def episode_loss_and_grads(w, g, theta0, horizon, feed_initial_input=False):
    """Episode loss and its gradient with respect to every weight tensor.

    Backpropagates through the unrolled cell/readout chain and, via the
    simulator's exact gradient, through each energy evaluation.
    """
    episode, caches = _rollout(w, g, theta0, horizon, feed_initial_input)
    e_scale = float(g.n_edges)
    loss = gru_loss(episode)
    d_energy = _loss_energy_subgrad(episode.energies)
    grads = {name: np.zeros_like(arr) for name, arr in w.as_arrays().items()}

    def energy_grad(theta):
        return gradient(g, QaoaParams.from_flat(theta), "adjoint").flatten()

    g_theta = d_energy[horizon] * energy_grad(episode.thetas[horizon])
    gh = np.zeros(w.hidden_dim)
    for t in range(horizon - 1, -1, -1):
        grads["w_out"] += np.outer(g_theta, episode.hiddens[t + 1])
        grads["b_out"] += g_theta
        gh += w.w_out.T @ g_theta
        g_theta_prev = g_theta.copy()
        gx, gh_prev = _cell_backward(w, caches[t], gh, grads)
        g_energy_t = d_energy[t]
        if not feed_initial_input:
            g_theta_prev += gx[:w.param_dim]
            g_energy_t += gx[w.param_dim] / e_scale
        if t > 0:  # theta_0 is a constant, its gradient flows nowhere
            if g_energy_t != 0.0:
                g_theta_prev += g_energy_t * energy_grad(episode.thetas[t])
            g_theta = g_theta_prev
            gh = gh_prev
    return loss, grads, episode


def train_gru(w, training_graphs, epochs, meta_lr=1e-3, seed=0, horizon=10,
              batch_size=10, feed_initial_input=False):
    """Minimize the mean episode loss over the training graphs.

    Mini-batch gradients are averaged in a deterministically shuffled order
    and applied with Adam. Every episode restarts from a fresh seeded random
    theta_0 so the network learns to improve arbitrary initializations.
    Returns (weights, per-epoch mean loss history).
    """
    if not training_graphs:
        raise ValueError("training set must be nonempty")
    if epochs == 0:
        return w.copy(), []
    hidden_dim = w.hidden_dim
    param_dim = w.param_dim
    flat = w.to_flat()
    adam = make_optimizer("adam", flat.shape[0], meta_lr)
    history = []
    for epoch in range(epochs):
        order = list(range(len(training_graphs)))
        StableRng(derive_seed(seed, 101, epoch)).shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            current = GruWeights.from_flat(flat, hidden_dim, param_dim)
            acc = np.zeros_like(flat)
            for gi in batch:
                graph = training_graphs[gi]
                theta0 = random_params(
                    1, derive_seed(seed, 202, epoch, gi)
                ).flatten()
                loss, grads, _ = episode_loss_and_grads(
                    current, graph, theta0, horizon, feed_initial_input
                )
                if not np.isfinite(loss):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, graph {gi}"
                    )
                acc += np.concatenate(
                    [grads[name].ravel() for name in _WEIGHT_FIELDS]
                )
                epoch_losses.append(loss)
            acc /= len(batch)
            # optimizer_step ascends; negate for descent on the loss
            flat, adam = optimizer_step(adam, flat, -acc)
        history.append(float(np.mean(epoch_losses)))
    return GruWeights.from_flat(flat, hidden_dim, param_dim), history
