"""Experiment driver: instance grids, method runners under shared budgets,
model training pipeline, checkpoint wrappers and CSV emission.

Every cell's randomness derives from (master seed, experiment, n, p, instance
index) so results are independent of scheduling; within a cell all methods
consume the same instance and the same initial-parameter seed. Wall-clock
columns are informational only and excluded from determinism comparisons.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .bilinear import depth_progressive_run
from .checkpoint import (CheckpointShapeError, load_checkpoint,
                         save_checkpoint)
from .cnn_predictor import (CnnWeights, cnn_forward, gru_depth1_params,
                            init_cnn_weights, make_depth2_labels, train_cnn)
from .errors import ConfigError
from .graphs import brute_force_max_cut, generate_erdos_renyi
from .meta_gru import GruWeights, init_gru_weights, run_episode, train_gru
from .optimizers import maximize
from .rng import StableRng, derive_seed, prob_tag
from .simulator import QaoaParams, approximation_ratio, random_params

EXPERIMENTS = (
    "depth1-sweep",
    "edgeprob-sweep",
    "depth2-compare",
    "bilinear-sweep",
    "strategy-compare",
)

_DEFAULT_METHODS = {
    "depth1-sweep": ["adam", "rmsprop", "adagrad", "gru"],
    "edgeprob-sweep": ["adam", "rmsprop", "adagrad", "gru"],
    "depth2-compare": ["gru", "gru-cnn"],
    "bilinear-sweep": ["bilinear"],
    "strategy-compare": ["bilinear", "random-init"],
}

_DEFAULT_DEPTH = {
    "depth1-sweep": 1,
    "edgeprob-sweep": 1,
    "depth2-compare": 2,
    "bilinear-sweep": 12,
    "strategy-compare": 10,
}

_NEURAL_METHODS = {"gru", "gru-cnn", "bilinear"}

RAW_HEADER = "experiment,n,p,seed,depth,method,energy,c_max,ratio,grad_evals,iters,wall_ms"
AGG_HEADER = "experiment,n,p,depth,method,mean_ratio,std_ratio"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    nodes: list
    edge_probs: list
    instances: int = 10
    methods: list = None
    depth: int = None
    budget: int = 200
    tol: float = 1e-6
    learning_rate: float = 0.1
    refine_budget: int = 300
    refine_lr: float = 0.01
    refine_tol: float = 1e-7
    horizon: int = 10
    master_seed: int = 1729
    random_edge_probs: bool = False
    variant: str = "printed"
    gru_checkpoint: str = None
    cnn_checkpoint: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.instances < 1:
            raise ConfigError("instances must be >= 1")
        for n in self.nodes:
            if not (2 <= n <= 24):
                raise ConfigError(f"node count {n} outside [2, 24]")
        for p in self.edge_probs:
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"edge probability {p} outside [0, 1]")
        if self.methods is None:
            object.__setattr__(
                self, "methods", list(_DEFAULT_METHODS[self.experiment])
            )
        if self.depth is None:
            object.__setattr__(self, "depth", _DEFAULT_DEPTH[self.experiment])

    @classmethod
    def from_dict(cls, payload, **overrides):
        data = dict(payload)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' field")
        if "nodes" not in data or "edge_probs" not in data:
            raise ConfigError("config needs 'nodes' and 'edge_probs'")
        return cls(**data)


@dataclass(frozen=True)
class BenchmarkRecord:
    experiment: str
    n: int
    p: float
    seed: int
    depth: int
    method: str
    energy: float
    c_max: float
    ratio: float
    grad_evals: int
    iters: int
    wall_ms: float

    def __post_init__(self):
        if not (-1e-9 <= self.ratio <= 1.0 + 1e-9):
            raise ValueError(f"ratio {self.ratio} outside [0, 1]")

    def sort_key(self):
        return (self.experiment, self.n, self.p, self.seed, self.depth,
                self.method)


# -- model checkpoint wrappers ------------------------------------------------

def save_gru_checkpoint(path, weights, metadata=None):
    meta = {"hidden_dim": weights.hidden_dim, "param_dim": weights.param_dim}
    meta.update(metadata or {})
    save_checkpoint(path, "gru", weights.as_arrays(), meta)


def load_gru_checkpoint(path, expect_hidden_dim=None):
    arrays, meta = load_checkpoint(path, expect_kind="gru")
    try:
        weights = GruWeights(**arrays)
    except (TypeError, ValueError) as exc:
        raise CheckpointShapeError(f"{path}: {exc}")
    if expect_hidden_dim is not None and weights.hidden_dim != expect_hidden_dim:
        raise CheckpointShapeError(
            f"{path}: array 'w_z' implies hidden_dim="
            f"{weights.hidden_dim}, expected {expect_hidden_dim}"
        )
    return weights, meta


def save_cnn_checkpoint(path, weights, metadata=None):
    save_checkpoint(path, "cnn", weights.as_arrays(), metadata or {})


def load_cnn_checkpoint(path):
    arrays, meta = load_checkpoint(path, expect_kind="cnn")
    try:
        weights = CnnWeights(**arrays)
    except (TypeError, ValueError) as exc:
        raise CheckpointShapeError(f"{path}: {exc}")
    return weights, meta


# -- training pipeline --------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    master_seed: int = 1729
    n_train_graphs: int = 100
    node_range: tuple = (4, 14)
    p_range: tuple = (0.5, 1.0)
    hidden_dim: int = 32
    horizon: int = 10
    gru_epochs: int = 150
    meta_lr: float = 1e-3
    gru_batch_size: int = 10
    weight_init_scale: float = 0.08
    label_restarts: int = 50
    label_budget: int = 300
    cnn_epochs: int = 50
    cnn_batch_size: int = 6
    cnn_lr: float = 1e-4

    @classmethod
    def from_dict(cls, payload, **overrides):
        data = dict(payload)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
        if "node_range" in data:
            data["node_range"] = tuple(data["node_range"])
        if "p_range" in data:
            data["p_range"] = tuple(data["p_range"])
        return cls(**data)


def training_graphs(cfg):
    """The training ensemble: node counts uniform on the configured range,
    edge probabilities uniform on [p_lo, p_hi], seeds disjoint from every
    evaluation stream (distinct derivation tag)."""
    graphs = []
    lo, hi = cfg.node_range
    for i in range(cfg.n_train_graphs):
        rng = StableRng(derive_seed(cfg.master_seed, 9000, i))
        n = lo + rng.randint(hi - lo + 1)
        p = rng.uniform(cfg.p_range[0], cfg.p_range[1])
        graphs.append(
            generate_erdos_renyi(n, p, derive_seed(cfg.master_seed, 9001, i))
        )
    return graphs


def train_models(cfg, out_dir):
    """Train GRU, generate depth-2 labels, train CNN; write checkpoints and
    loss histories. Returns a dict of output paths."""
    os.makedirs(out_dir, exist_ok=True)
    graphs = training_graphs(cfg)
    gru0 = init_gru_weights(
        hidden_dim=cfg.hidden_dim,
        scale=cfg.weight_init_scale,
        seed=derive_seed(cfg.master_seed, 9100),
    )
    gru_w, gru_history = train_gru(
        gru0, graphs, epochs=cfg.gru_epochs, meta_lr=cfg.meta_lr,
        seed=derive_seed(cfg.master_seed, 9200), horizon=cfg.horizon,
        batch_size=cfg.gru_batch_size,
    )
    paths = {
        "gru": os.path.join(out_dir, "gru.json"),
        "labels": os.path.join(out_dir, "labels.json"),
        "cnn": os.path.join(out_dir, "cnn.json"),
        "history": os.path.join(out_dir, "training_history.json"),
    }
    save_gru_checkpoint(
        paths["gru"], gru_w,
        {"horizon": cfg.horizon, "epochs": cfg.gru_epochs,
         "meta_lr": cfg.meta_lr, "seed": cfg.master_seed},
    )
    dataset = make_depth2_labels(
        graphs, gru_w, restarts=cfg.label_restarts,
        seed=derive_seed(cfg.master_seed, 9300), budget=cfg.label_budget,
        horizon=cfg.horizon,
    )
    dataset.to_json(paths["labels"])
    cnn0 = init_cnn_weights(seed=derive_seed(cfg.master_seed, 9400))
    cnn_w, cnn_history = train_cnn(
        cnn0, dataset, epochs=cfg.cnn_epochs, batch_size=cfg.cnn_batch_size,
        lr=cfg.cnn_lr, seed=derive_seed(cfg.master_seed, 9500),
    )
    save_cnn_checkpoint(
        paths["cnn"], cnn_w,
        {"epochs": cfg.cnn_epochs, "batch_size": cfg.cnn_batch_size,
         "lr": cfg.cnn_lr, "seed": cfg.master_seed},
    )
    import json

    with open(paths["history"], "w") as fh:
        json.dump({"gru_loss": gru_history, "cnn_loss": cnn_history}, fh,
                  indent=1)
    return paths


# -- experiment runners -------------------------------------------------------

def _instance(cfg, n, p, idx):
    """(graph, actual p, instance seed) for one cell slot."""
    if cfg.random_edge_probs:
        draw = StableRng(derive_seed(cfg.master_seed, 555, n, idx))
        p = round(draw.uniform(0.5, 1.0), 6)
    seed = derive_seed(
        cfg.master_seed, EXPERIMENTS.index(cfg.experiment), n, prob_tag(p), idx
    )
    return generate_erdos_renyi(n, p, seed), p, seed


def _record(cfg, n, p, seed, depth, method, trace_like, c_max):
    energy, grad_evals, iters, wall_ms = trace_like
    return BenchmarkRecord(
        experiment=cfg.experiment, n=n, p=p, seed=seed, depth=depth,
        method=method, energy=energy, c_max=c_max,
        ratio=approximation_ratio(energy, c_max), grad_evals=grad_evals,
        iters=iters, wall_ms=wall_ms,
    )


def _run_depth1_cell(cfg, g, p, seed, gru_weights):
    c_max = brute_force_max_cut(g).c_max
    init_seed = derive_seed(seed, 7)
    theta0 = random_params(1, init_seed)
    records = []
    for method in cfg.methods:
        if method == "gru":
            episode = run_episode(gru_weights, g, init_seed, cfg.horizon)
            trace = maximize(
                g, episode.best_params, method="adam", budget=cfg.budget,
                tol=cfg.tol, learning_rate=cfg.learning_rate,
            )
        else:
            trace = maximize(
                g, theta0, method=method, budget=cfg.budget, tol=cfg.tol,
                learning_rate=cfg.learning_rate,
            )
        records.append(_record(
            cfg, g.n_nodes, p, seed, 1, method,
            (trace.best_energy, trace.grad_evals, trace.iterations,
             trace.wall_ms), c_max,
        ))
    return records


def _run_depth2_cell(cfg, g, p, seed, gru_weights, cnn_weights):
    c_max = brute_force_max_cut(g).c_max
    init_seed = derive_seed(seed, 7)
    theta1, trace1 = gru_depth1_params(
        gru_weights, g, init_seed, horizon=cfg.horizon,
        refine_budget=cfg.refine_budget, refine_lr=cfg.learning_rate,
        refine_tol=cfg.refine_tol,
    )
    records = []
    if "gru" in cfg.methods:
        records.append(_record(
            cfg, g.n_nodes, p, seed, 1, "gru",
            (trace1.best_energy, trace1.grad_evals, trace1.iterations,
             trace1.wall_ms), c_max,
        ))
    if "gru-cnn" in cfg.methods:
        quad = cnn_forward(cnn_weights, theta1.flatten())
        depth2_init = QaoaParams(gammas=quad[:2].copy(), betas=quad[2:].copy())
        trace = maximize(
            g, depth2_init, method="adam", budget=cfg.refine_budget,
            tol=cfg.refine_tol, learning_rate=cfg.learning_rate,
        )
        records.append(_record(
            cfg, g.n_nodes, p, seed, 2, "gru-cnn",
            (trace.best_energy, trace.grad_evals, trace.iterations,
             trace.wall_ms), c_max,
        ))
    return records


def _run_bilinear_cell(cfg, g, p, seed, gru_weights, cnn_weights):
    schedule = depth_progressive_run(
        g, cfg.depth, gru_weights, cnn_weights,
        refine_budget=cfg.refine_budget, refine_lr=cfg.refine_lr,
        refine_tol=cfg.refine_tol, seed=derive_seed(seed, 7),
        horizon=cfg.horizon, variant=cfg.variant,
    )
    return [
        _record(
            cfg, g.n_nodes, p, seed, entry.depth, "bilinear",
            (entry.energy, entry.grad_evals, entry.iterations, 0.0),
            schedule.c_max,
        )
        for entry in schedule.entries
    ]


def _run_strategy_cell(cfg, g, p, seed, gru_weights, cnn_weights):
    c_max = brute_force_max_cut(g).c_max
    records = []
    if "bilinear" in cfg.methods:
        schedule = depth_progressive_run(
            g, cfg.depth, gru_weights, cnn_weights,
            refine_budget=cfg.refine_budget, refine_lr=cfg.refine_lr,
            refine_tol=cfg.refine_tol, seed=derive_seed(seed, 7),
            horizon=cfg.horizon, variant=cfg.variant,
        )
        entry = schedule.entry(cfg.depth)
        records.append(_record(
            cfg, g.n_nodes, p, seed, cfg.depth, "bilinear",
            (entry.energy, entry.grad_evals, entry.iterations, 0.0), c_max,
        ))
    if "random-init" in cfg.methods:
        start = random_params(cfg.depth, derive_seed(seed, 8))
        trace = maximize(
            g, start, method="adam", budget=cfg.refine_budget,
            tol=cfg.refine_tol, learning_rate=cfg.refine_lr,
        )
        records.append(_record(
            cfg, g.n_nodes, p, seed, cfg.depth, "random-init",
            (trace.best_energy, trace.grad_evals, trace.iterations,
             trace.wall_ms), c_max,
        ))
    return records


def _load_models(cfg):
    needs_gru = any(m in _NEURAL_METHODS for m in cfg.methods)
    needs_cnn = any(m in ("gru-cnn", "bilinear") for m in cfg.methods)
    gru_weights = cnn_weights = None
    if needs_gru:
        if not cfg.gru_checkpoint or not os.path.exists(cfg.gru_checkpoint):
            raise ConfigError(
                f"experiment {cfg.experiment!r} needs a GRU checkpoint "
                f"(got {cfg.gru_checkpoint!r})"
            )
        gru_weights, _ = load_gru_checkpoint(cfg.gru_checkpoint)
    if needs_cnn:
        if not cfg.cnn_checkpoint or not os.path.exists(cfg.cnn_checkpoint):
            raise ConfigError(
                f"experiment {cfg.experiment!r} needs a CNN checkpoint "
                f"(got {cfg.cnn_checkpoint!r})"
            )
        cnn_weights, _ = load_cnn_checkpoint(cfg.cnn_checkpoint)
    return gru_weights, cnn_weights


def run_experiment(cfg, gru_weights=None, cnn_weights=None):
    """All (n, p, instance) cells of the configured grid, every method under
    the shared budget; returns records sorted canonically."""
    if gru_weights is None and cnn_weights is None:
        gru_weights, cnn_weights = _load_models(cfg)

    def run_cell(task):
        n, p0, idx = task
        g, p, seed = _instance(cfg, n, p0, idx)
        if cfg.experiment in ("depth1-sweep", "edgeprob-sweep"):
            return _run_depth1_cell(cfg, g, p, seed, gru_weights)
        if cfg.experiment == "depth2-compare":
            return _run_depth2_cell(cfg, g, p, seed, gru_weights, cnn_weights)
        if cfg.experiment == "bilinear-sweep":
            return _run_bilinear_cell(cfg, g, p, seed, gru_weights, cnn_weights)
        return _run_strategy_cell(cfg, g, p, seed, gru_weights, cnn_weights)

    tasks = [
        (n, p, idx)
        for n in cfg.nodes
        for p in cfg.edge_probs
        for idx in range(cfg.instances)
    ]
    workers = int(os.environ.get("QAOA_INIT_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_cell, tasks))
    else:
        chunks = [run_cell(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=BenchmarkRecord.sort_key)
    return records


# -- result files -------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_results(records, path):
    """Raw CSV (sorted, 12 significant digits) plus the companion aggregate
    CSV next to it (suffix _agg.csv). Returns the aggregate path."""
    if not records:
        raise ValueError("no records to write")
    ordered = sorted(records, key=BenchmarkRecord.sort_key)
    with open(path, "w") as fh:
        fh.write(RAW_HEADER + "\n")
        for r in ordered:
            fh.write(",".join([
                r.experiment, str(r.n), _fmt(r.p), str(r.seed), str(r.depth),
                r.method, _fmt(r.energy), _fmt(r.c_max), _fmt(r.ratio),
                str(r.grad_evals), str(r.iters), _fmt(r.wall_ms),
            ]) + "\n")
    agg_path = _aggregate_path(path)
    write_aggregates(ordered, agg_path)
    return agg_path


def _aggregate_path(raw_path):
    root, ext = os.path.splitext(raw_path)
    return f"{root}_agg{ext or '.csv'}"


def aggregate_records(records):
    """[(key, mean_ratio, std_ratio)] keyed by (experiment, n, p, depth,
    method); standard deviation is the population one."""
    groups = {}
    for r in records:
        key = (r.experiment, r.n, r.p, r.depth, r.method)
        groups.setdefault(key, []).append(r.ratio)
    out = []
    for key in sorted(groups):
        ratios = np.asarray(groups[key])
        out.append((key, float(ratios.mean()), float(ratios.std())))
    return out


def write_aggregates(records, path):
    with open(path, "w") as fh:
        fh.write(AGG_HEADER + "\n")
        for (exp, n, p, depth, method), mean, std in aggregate_records(records):
            fh.write(",".join([
                exp, str(n), _fmt(p), str(depth), method, _fmt(mean),
                _fmt(std),
            ]) + "\n")


def read_records(path):
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            (exp, n, p, seed, depth, method, energy, c_max, ratio, grad_evals,
             iters, wall_ms) = line.strip().split(",")
            records.append(BenchmarkRecord(
                experiment=exp, n=int(n), p=float(p), seed=int(seed),
                depth=int(depth), method=method, energy=float(energy),
                c_max=float(c_max), ratio=float(ratio),
                grad_evals=int(grad_evals), iters=int(iters),
                wall_ms=float(wall_ms),
            ))
    return records
