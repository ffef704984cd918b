"""CNN mapping refined depth-1 parameters to depth-2 initial parameters.

Layout: the input is a single-channel 2x1 tensor holding (gamma_1; beta_1).
Two zero-padded 2x2 convolutions lift the channel count 1 -> 16 -> 64 (ReLU
after each), and an unpadded 3x2 convolution reduces 64 -> 1, yielding a 2x2
output read row-wise as (gamma_1, gamma_2; beta_1, beta_2). All strides are 1.
The spatial pipeline is therefore fixed:

    (1, 2, 1) -> (16, 3, 2) -> (64, 4, 3) -> (1, 2, 2)

Training minimizes the mean squared parameter error against multi-start
optimized depth-2 labels, wrapped onto the canonical angle domain so the MSE
is not corrupted by 2-pi aliases.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .graphs import Graph, brute_force_max_cut
from .meta_gru import run_episode
from .optimizers import make_optimizer, maximize, optimizer_step
from .rng import StableRng, derive_seed
from .simulator import energy, mirror_canonical, random_params

_SHAPES = {
    "conv1_w": (16, 1, 2, 2),
    "conv1_b": (16,),
    "conv2_w": (64, 16, 2, 2),
    "conv2_b": (64,),
    "conv3_w": (1, 64, 3, 2),
    "conv3_b": (1,),
}
_FIELDS = tuple(_SHAPES)


@dataclass
class CnnWeights:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    conv3_w: np.ndarray
    conv3_b: np.ndarray

    def __post_init__(self):
        for name, shape in _SHAPES.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")

    def copy(self):
        return CnnWeights(**{f: getattr(self, f).copy() for f in _FIELDS})

    def to_flat(self):
        return np.concatenate([getattr(self, f).ravel() for f in _FIELDS])

    @classmethod
    def from_flat(cls, flat):
        values = {}
        offset = 0
        for name in _FIELDS:
            size = int(np.prod(_SHAPES[name]))
            values[name] = flat[offset:offset + size].reshape(_SHAPES[name]).copy()
            offset += size
        if offset != flat.shape[0]:
            raise ValueError("flat vector length mismatch")
        return cls(**values)

    def as_arrays(self):
        return {f: getattr(self, f) for f in _FIELDS}


def init_cnn_weights(seed=0):
    """He-uniform filters (+-sqrt(6/fan_in)), zero biases."""
    rng = StableRng(seed)
    values = {}
    for name, shape in _SHAPES.items():
        if name.endswith("_b"):
            values[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            values[name] = rng.uniform_array(
                -bound, bound, int(np.prod(shape))
            ).reshape(shape)
    return CnnWeights(**values)


def zero_cnn_weights():
    return CnnWeights(**{n: np.zeros(s) for n, s in _SHAPES.items()})


def _conv_forward(x, weight, bias, pad):
    b, _, h, wd = x.shape
    c_out, _, kh, kw = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    h_out = h + 2 * pad - kh + 1
    w_out = wd + 2 * pad - kw + 1
    out = np.zeros((b, c_out, h_out, w_out))
    for u in range(kh):
        for v in range(kw):
            out += np.einsum(
                "bchw,oc->bohw",
                xp[:, :, u:u + h_out, v:v + w_out],
                weight[:, :, u, v],
            )
    out += bias.reshape(1, c_out, 1, 1)
    return out, xp


def _conv_backward(d_out, xp, weight, pad, x_shape):
    _, _, h, wd = x_shape
    _, _, kh, kw = weight.shape
    h_out, w_out = d_out.shape[2], d_out.shape[3]
    dw = np.zeros_like(weight)
    db = d_out.sum(axis=(0, 2, 3))
    dxp = np.zeros_like(xp)
    for u in range(kh):
        for v in range(kw):
            dw[:, :, u, v] = np.einsum(
                "bohw,bchw->oc", d_out, xp[:, :, u:u + h_out, v:v + w_out]
            )
            dxp[:, :, u:u + h_out, v:v + w_out] += np.einsum(
                "bohw,oc->bchw", d_out, weight[:, :, u, v]
            )
    dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
    return dx, dw, db


def _forward_batch(w, theta1_batch):
    x = np.asarray(theta1_batch, dtype=np.float64).reshape(-1, 1, 2, 1)
    a1, xp1 = _conv_forward(x, w.conv1_w, w.conv1_b, pad=1)
    assert a1.shape[1:] == (16, 3, 2)
    r1 = np.maximum(a1, 0.0)
    a2, xp2 = _conv_forward(r1, w.conv2_w, w.conv2_b, pad=1)
    assert a2.shape[1:] == (64, 4, 3)
    r2 = np.maximum(a2, 0.0)
    a3, xp3 = _conv_forward(r2, w.conv3_w, w.conv3_b, pad=0)
    assert a3.shape[1:] == (1, 2, 2)
    out = a3.reshape(-1, 4)  # rows: (gamma_1, gamma_2), (beta_1, beta_2)
    caches = (x, a1, xp1, r1, a2, xp2, r2, xp3)
    return out, caches


def _backward_batch(w, caches, d_out):
    x, a1, xp1, r1, a2, xp2, r2, xp3 = caches
    grads = {}
    da3 = d_out.reshape(-1, 1, 2, 2)
    dr2, grads["conv3_w"], grads["conv3_b"] = _conv_backward(
        da3, xp3, w.conv3_w, 0, r2.shape
    )
    da2 = dr2 * (a2 > 0.0)
    dr1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(
        da2, xp2, w.conv2_w, 1, r1.shape
    )
    da1 = dr1 * (a1 > 0.0)
    _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(
        da1, xp1, w.conv1_w, 1, x.shape
    )
    return grads


def cnn_forward(w, theta1):
    """Depth-2 parameter quadruple (gamma_1, gamma_2, beta_1, beta_2)."""
    theta1 = np.asarray(theta1, dtype=np.float64).reshape(-1)
    if theta1.shape != (2,):
        raise ValueError("theta1 must hold exactly (gamma_1, beta_1)")
    if not np.all(np.isfinite(theta1)):
        raise NumericError("non-finite CNN input")
    out, _ = _forward_batch(w, theta1.reshape(1, 2))
    return out[0]


def cnn_loss(predictions, labels):
    """(1/n) sum_i ||pred_i - label_i||^2 over the 4 parameters."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ValueError("prediction/label count mismatch")
    diff = predictions - labels
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def loss_and_grads(w, theta1_batch, label_batch):
    preds, caches = _forward_batch(w, theta1_batch)
    labels = np.asarray(label_batch, dtype=np.float64)
    loss = cnn_loss(preds, labels)
    d_out = 2.0 * (preds - labels) / preds.shape[0]
    return loss, _backward_batch(w, caches, d_out)


@dataclass
class Depth2Sample:
    n_nodes: int
    edges: tuple
    theta1: np.ndarray  # (gamma_1, beta_1) from the GRU pipeline, canonical
    theta2_star: np.ndarray  # (gamma_1, gamma_2, beta_1, beta_2), canonical
    label_energy: float
    c_max: float

    def graph(self):
        return Graph(self.n_nodes, self.edges)


@dataclass
class Depth2Dataset:
    samples: list

    def features(self):
        return np.stack([s.theta1 for s in self.samples])

    def labels(self):
        return np.stack([s.theta2_star for s in self.samples])

    def __len__(self):
        return len(self.samples)

    def to_json(self, path):
        payload = [
            {
                "n": s.n_nodes,
                "edges": [list(e) for e in s.edges],
                "theta1": list(s.theta1),
                "theta2_star": list(s.theta2_star),
                "label_energy": s.label_energy,
                "c_max": s.c_max,
            }
            for s in self.samples
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        samples = [
            Depth2Sample(
                n_nodes=entry["n"],
                edges=tuple(tuple(e) for e in entry["edges"]),
                theta1=np.asarray(entry["theta1"], dtype=np.float64),
                theta2_star=np.asarray(entry["theta2_star"], dtype=np.float64),
                label_energy=float(entry["label_energy"]),
                c_max=float(entry["c_max"]),
            )
            for entry in payload
        ]
        return cls(samples=samples)


def _quadruple(params):
    return np.array([
        params.gammas[0], params.gammas[1], params.betas[0], params.betas[1]
    ])


def gru_depth1_params(gru_weights, g, seed, horizon=10, refine_budget=300,
                      refine_lr=0.1, refine_tol=1e-7):
    """GRU episode proposal followed by local refinement; the depth-1 stage
    shared by label generation, the depth-2 predictor and the
    depth-progressive pipeline.

    Returns (params, trace) with the params mirror-canonicalized: downstream
    consumers (CNN features, bilinear extrapolation pairs) must live on one
    symmetry branch or the depth trend breaks.
    """
    episode = run_episode(gru_weights, g, seed, horizon)
    trace = maximize(
        g, episode.best_params, method="adam", budget=refine_budget,
        tol=refine_tol, learning_rate=refine_lr,
    )
    return mirror_canonical(trace.best_params), trace


def make_depth2_labels(graphs, gru_weights, restarts=50, seed=0, budget=300,
                       horizon=10):
    """Best-of-`restarts` depth-2 optima as labels, GRU depth-1 as features.

    Each restart is an independent Adam maximization (lr 0.1, `budget`
    iterations) from a random canonical-domain start. Both features and
    labels are stored mirror-canonically (gamma_1 <= pi) so the MSE is not
    corrupted by 2-pi aliases or the time-reversal twin of each optimum.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    samples = []
    for gi, g in enumerate(graphs):
        theta1, _ = gru_depth1_params(
            gru_weights, g, derive_seed(seed, 31, gi), horizon
        )  # already mirror-canonical
        best_energy = -np.inf
        best_params = None
        for r in range(restarts):
            start = random_params(2, derive_seed(seed, 32, gi, r))
            trace = maximize(
                g, start, method="adam", budget=budget, tol=1e-6,
                learning_rate=0.1,
            )
            if trace.best_energy > best_energy:
                best_energy = trace.best_energy
                best_params = trace.best_params
        label = mirror_canonical(best_params)
        c_max = brute_force_max_cut(g).c_max
        assert best_energy <= c_max + 1e-9
        assert best_energy >= energy(g, label) - 1e-9
        samples.append(
            Depth2Sample(
                n_nodes=g.n_nodes,
                edges=g.edges,
                theta1=theta1.flatten(),
                theta2_star=_quadruple(label),
                label_energy=best_energy,
                c_max=c_max,
            )
        )
    return Depth2Dataset(samples=samples)


def train_cnn(w, dataset, epochs=50, batch_size=6, lr=1e-4, seed=0):
    """Adam on the MSE loss with deterministic shuffling.

    Returns (weights, per-epoch mean batch loss history).
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    if epochs == 0:
        return w.copy(), []
    features = dataset.features()
    labels = dataset.labels()
    flat = w.to_flat()
    adam = make_optimizer("adam", flat.shape[0], lr)
    history = []
    for epoch in range(epochs):
        order = list(range(len(dataset)))
        StableRng(derive_seed(seed, 77, epoch)).shuffle(order)
        batch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            current = CnnWeights.from_flat(flat)
            loss, grads = loss_and_grads(
                current, features[batch], labels[batch]
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            flat_grad = np.concatenate([grads[n].ravel() for n in _FIELDS])
            flat, adam = optimizer_step(adam, flat, -flat_grad)
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
    return CnnWeights.from_flat(flat), history


def cnn_weight_gradient_check(w, theta1_batch, label_batch, n_checks=20,
                              seed=0, grad_fn=None, h=1e-4):
    """Compare backprop gradients against central finite differences on
    randomly chosen weights; returns {"max_rel_err": ..., "checks": [...]}.

    `grad_fn` defaults to the analytic backprop and exists so tests can
    verify the check itself flags a perturbed implementation.
    """
    grad_fn = grad_fn or loss_and_grads
    _, grads = grad_fn(w, theta1_batch, label_batch)
    flat_grad = np.concatenate([grads[n].ravel() for n in _FIELDS])
    flat = w.to_flat()
    rng = StableRng(seed)
    checks = []
    max_rel = 0.0
    for _ in range(n_checks):
        k = rng.randint(flat.shape[0])
        bumped = flat.copy()
        bumped[k] += h
        loss_p, _ = loss_and_grads(CnnWeights.from_flat(bumped), theta1_batch,
                                   label_batch)
        bumped[k] -= 2 * h
        loss_m, _ = loss_and_grads(CnnWeights.from_flat(bumped), theta1_batch,
                                   label_batch)
        fd = (loss_p - loss_m) / (2 * h)
        rel = abs(fd - flat_grad[k]) / max(abs(fd), abs(flat_grad[k]), 1e-8)
        checks.append({"index": int(k), "analytic": float(flat_grad[k]),
                       "fd": float(fd), "rel_err": float(rel)})
        max_rel = max(max_rel, rel)
    return {"max_rel_err": max_rel, "checks": checks}
