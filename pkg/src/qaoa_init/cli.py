"""Command-line interface.

Subcommands: train-gru, labels, train-cnn, bench, report, kernel-bench.
Config files are JSON; flags override file values. QAOA_INIT_OUT_DIR sets the
default output directory and QAOA_INIT_THREADS the benchmark worker count.
"""

import argparse
import json
import os
import sys
import time

import numpy as np


def _default_out_dir():
    return os.environ.get("QAOA_INIT_OUT_DIR", "results")


def _load_json(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _parse_int_list(text):
    return [int(tok) for tok in text.split(",") if tok]


def _parse_float_list(text):
    return [float(tok) for tok in text.split(",") if tok]


def _cmd_train_gru(args):
    from .bench import TrainConfig, save_gru_checkpoint, training_graphs
    from .meta_gru import init_gru_weights, train_gru
    from .rng import derive_seed

    cfg = TrainConfig.from_dict(
        _load_json(args.config),
        master_seed=args.seed,
        gru_epochs=args.epochs,
        hidden_dim=args.hidden_dim,
        meta_lr=args.meta_lr,
    )
    graphs = training_graphs(cfg)
    weights = init_gru_weights(
        hidden_dim=cfg.hidden_dim, scale=cfg.weight_init_scale,
        seed=derive_seed(cfg.master_seed, 9100),
    )
    weights, history = train_gru(
        weights, graphs, epochs=cfg.gru_epochs, meta_lr=cfg.meta_lr,
        seed=derive_seed(cfg.master_seed, 9200), horizon=cfg.horizon,
        batch_size=cfg.gru_batch_size,
    )
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_gru_checkpoint(
        args.out, weights,
        {"horizon": cfg.horizon, "epochs": cfg.gru_epochs,
         "meta_lr": cfg.meta_lr, "seed": cfg.master_seed},
    )
    if history:
        print(f"gru: {len(history)} epochs, loss {history[0]:.6f} -> "
              f"{history[-1]:.6f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_labels(args):
    from .bench import TrainConfig, load_gru_checkpoint, training_graphs
    from .cnn_predictor import make_depth2_labels
    from .rng import derive_seed

    cfg = TrainConfig.from_dict(
        _load_json(args.config),
        master_seed=args.seed,
        label_restarts=args.restarts,
    )
    gru_weights, _ = load_gru_checkpoint(args.gru)
    graphs = training_graphs(cfg)
    dataset = make_depth2_labels(
        graphs, gru_weights, restarts=cfg.label_restarts,
        seed=derive_seed(cfg.master_seed, 9300), budget=cfg.label_budget,
        horizon=cfg.horizon,
    )
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    dataset.to_json(args.out)
    print(f"wrote {args.out} ({len(dataset)} samples)")
    return 0


def _cmd_train_cnn(args):
    from .bench import TrainConfig, save_cnn_checkpoint
    from .cnn_predictor import Depth2Dataset, init_cnn_weights, train_cnn
    from .rng import derive_seed

    cfg = TrainConfig.from_dict(
        _load_json(args.config),
        master_seed=args.seed,
        cnn_epochs=args.epochs,
        cnn_lr=args.lr,
    )
    dataset = Depth2Dataset.from_json(args.labels)
    weights = init_cnn_weights(seed=derive_seed(cfg.master_seed, 9400))
    weights, history = train_cnn(
        weights, dataset, epochs=cfg.cnn_epochs,
        batch_size=cfg.cnn_batch_size, lr=cfg.cnn_lr,
        seed=derive_seed(cfg.master_seed, 9500),
    )
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_cnn_checkpoint(
        args.out, weights,
        {"epochs": cfg.cnn_epochs, "batch_size": cfg.cnn_batch_size,
         "lr": cfg.cnn_lr, "seed": cfg.master_seed},
    )
    if history:
        print(f"cnn: {len(history)} epochs, loss {history[0]:.6f} -> "
              f"{history[-1]:.6f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_bench(args):
    from .bench import ExperimentConfig, run_experiment, write_results
    from .graphs import save_graph

    cfg = ExperimentConfig.from_dict(
        _load_json(args.config),
        experiment=args.experiment,
        nodes=_parse_int_list(args.nodes) if args.nodes else None,
        edge_probs=_parse_float_list(args.edge_probs) if args.edge_probs else None,
        instances=args.instances,
        depth=args.depth,
        budget=args.budget,
        master_seed=args.seed,
        gru_checkpoint=args.gru,
        cnn_checkpoint=args.cnn,
    )
    out_dir = args.out or _default_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    records = run_experiment(cfg)
    raw_path = os.path.join(out_dir, f"{cfg.experiment}.csv")
    agg_path = write_results(records, raw_path)
    if args.save_instances:
        inst_dir = os.path.join(out_dir, "instances")
        os.makedirs(inst_dir, exist_ok=True)
        from .bench import _instance

        seen = set()
        for n in cfg.nodes:
            for p in cfg.edge_probs:
                for idx in range(cfg.instances):
                    g, p_actual, seed = _instance(cfg, n, p, idx)
                    if seed not in seen:
                        seen.add(seed)
                        save_graph(
                            g, os.path.join(inst_dir, f"graph_{seed}.txt")
                        )
    print(f"wrote {raw_path} ({len(records)} records) and {agg_path}")
    return 0


def _cmd_report(args):
    from .bench import read_records, write_aggregates

    records = read_records(args.records)
    write_aggregates(records, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_kernel_bench(args):
    """Compare the compiled kernel backend against the NumPy fallback."""
    from .kernels import available_backends

    backends = available_backends()
    n = args.qubits
    depth = args.depth
    dim = 1 << n
    rng = np.random.default_rng(7)
    amps0 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    amps0 /= np.linalg.norm(amps0)
    table = rng.integers(0, 3 * n, dim).astype(np.float64)
    table_int = table.astype(np.int32)
    lut = np.exp(-1j * 0.37 * np.arange(int(table.max()) + 1))

    print(f"workload: evolve-like sweep, {n} qubits, {depth} layers, "
          f"{args.repeats} repeats")
    print(f"{'backend':<10} {'ms/evolve':>12} {'expectation':>18}")
    reference = None
    for backend in backends:
        amps = amps0.copy()
        start = time.perf_counter()
        for _ in range(args.repeats):
            for _ in range(depth):
                backend.phase_multiply_lut(amps, table_int, lut)
                backend.mixer_apply(amps, n, 0.81)
        elapsed = (time.perf_counter() - start) / args.repeats * 1e3
        value = backend.expectation(amps, table)
        print(f"{backend.BACKEND:<10} {elapsed:>12.3f} {value:>18.12f}")
        if reference is None:
            reference = value
        elif abs(value - reference) > 1e-9:
            print("warning: backends disagree!", file=sys.stderr)
            return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qaoa-init",
        description="QAOA parameter-initialization benchmarks for Max-Cut",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-gru", help="train the GRU meta-optimizer")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--meta-lr", dest="meta_lr", type=float)
    p.set_defaults(func=_cmd_train_gru)

    p = sub.add_parser("labels", help="generate depth-2 training labels")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--gru", required=True, help="GRU checkpoint")
    p.add_argument("--out", required=True, help="labels JSON path")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.set_defaults(func=_cmd_labels)

    p = sub.add_parser("train-cnn", help="train the depth-2 CNN predictor")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--labels", required=True, help="labels JSON path")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=_cmd_train_cnn)

    p = sub.add_parser("bench", help="run a benchmark experiment")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--experiment", choices=[
        "depth1-sweep", "edgeprob-sweep", "depth2-compare", "bilinear-sweep",
        "strategy-compare",
    ])
    p.add_argument("--nodes", help="comma-separated node counts")
    p.add_argument("--edge-probs", dest="edge_probs",
                   help="comma-separated edge probabilities")
    p.add_argument("--instances", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gru", help="GRU checkpoint")
    p.add_argument("--cnn", help="CNN checkpoint")
    p.add_argument("--out", help="output directory")
    p.add_argument("--save-instances", action="store_true",
                   help="persist instance graphs in text format")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="recompute aggregates from a raw CSV")
    p.add_argument("--records", required=True, help="raw CSV path")
    p.add_argument("--out", required=True, help="aggregate CSV path")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("kernel-bench",
                       help="benchmark compiled vs fallback kernels")
    p.add_argument("--qubits", type=int, default=12)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--repeats", type=int, default=50)
    p.set_defaults(func=_cmd_kernel_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
