"""Acceptance gate: every release criterion checked at its stated tolerance,
one printed PASS line per criterion. Criteria 5-8 consume the session-trained
models (see conftest.trained_models); delete tests/_model_cache to retrain.
"""

import math
import time

import numpy as np

from qaoa_init.bench import ExperimentConfig, run_experiment
from qaoa_init.graphs import (Graph, brute_force_max_cut,
                              generate_erdos_renyi)
from qaoa_init.simulator import (QaoaParams, energy, gradient, random_params)

SINGLE_EDGE = Graph(2, ((0, 1),))


def _report(criterion, detail):
    print(f"\nACCEPTANCE {criterion}: PASS — {detail}")


def _complete_graph(n):
    return Graph(n, tuple((i, j) for i in range(n - 1) for j in range(i + 1, n)))


def _cell_means(records, methods):
    """{(n, p): {method: mean ratio}} from raw records."""
    cells = {}
    for r in records:
        cells.setdefault((r.n, r.p), {m: [] for m in methods})
        cells[(r.n, r.p)][r.method].append(r.ratio)
    return {
        key: {m: float(np.mean(v)) for m, v in per.items()}
        for key, per in cells.items()
    }


def test_criterion_1_simulator_exactness():
    start = time.perf_counter()
    worst = 0.0
    for gam in np.linspace(0.0, math.pi, 5):
        for bet in np.linspace(0.0, math.pi, 5):
            e = energy(SINGLE_EDGE, QaoaParams(np.array([gam]), np.array([bet])))
            analytic = 0.5 * (1.0 + math.sin(gam) * math.sin(4.0 * bet))
            worst = max(worst, abs(e - analytic))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12
    assert elapsed < 1.0
    _report(1, f"25-point analytic grid, max err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_uniform_state_baseline():
    rng = np.random.default_rng(2)
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(3, 13))
        g = generate_erdos_renyi(n, float(rng.uniform(0.3, 0.9)), 7000 + k)
        e = energy(g, QaoaParams(np.zeros(2), np.zeros(2)))
        worst = max(worst, abs(e - g.n_edges / 2.0))
    assert worst < 1e-12
    _report(2, f"E(0,0) = |E|/2 on 50 graphs, max err {worst:.2e}")


def test_criterion_3_gradient_fidelity(trained_models):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for case in range(100):
        n = int(rng.integers(3, 9))
        depth = int(rng.integers(1, 5))
        g = generate_erdos_renyi(n, float(rng.uniform(0.4, 0.9)), 8000 + case)
        p = random_params(depth, seed=9000 + case)
        shift = gradient(g, p, "parameter-shift").flatten()
        fd = gradient(g, p, "finite-difference").flatten()
        np.testing.assert_allclose(shift, fd, rtol=1e-6, atol=1e-9)
        scale = np.maximum(np.maximum(np.abs(shift), np.abs(fd)), 1e-3)
        worst = max(worst, float(np.max(np.abs(shift - fd) / scale)))

    # GRU BPTT vs central finite differences on a fixed tiny configuration
    from qaoa_init.meta_gru import (GruWeights, _WEIGHT_FIELDS,
                                    episode_loss_and_grads, init_gru_weights)

    w = init_gru_weights(hidden_dim=2, seed=7, scale=0.3)
    theta0 = random_params(1, 99).flatten()
    _, grads, _ = episode_loss_and_grads(w, SINGLE_EDGE, theta0, 3)
    flat_grad = np.concatenate([grads[f].ravel() for f in _WEIGHT_FIELDS])
    flat = w.to_flat()
    h = 1e-4
    gru_worst = 0.0
    for k in np.random.default_rng(5).choice(flat.size, 30, replace=False):
        bumped = flat.copy()
        bumped[k] += h
        lp, _, _ = episode_loss_and_grads(GruWeights.from_flat(bumped, 2),
                                          SINGLE_EDGE, theta0, 3)
        bumped[k] -= 2 * h
        lm, _, _ = episode_loss_and_grads(GruWeights.from_flat(bumped, 2),
                                          SINGLE_EDGE, theta0, 3)
        fd_val = (lp - lm) / (2 * h)
        rel = abs(fd_val - flat_grad[k]) / max(abs(fd_val),
                                               abs(flat_grad[k]), 1e-8)
        gru_worst = max(gru_worst, rel)
    assert gru_worst < 1e-3

    # CNN backprop vs finite differences
    from qaoa_init.cnn_predictor import (cnn_weight_gradient_check,
                                         init_cnn_weights)

    rng2 = np.random.default_rng(8)
    report = cnn_weight_gradient_check(
        init_cnn_weights(seed=4), rng2.uniform(0, 2 * np.pi, (5, 2)),
        rng2.uniform(0, 2 * np.pi, (5, 4)), n_checks=30, seed=0,
    )
    assert report["max_rel_err"] < 1e-4
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report(3, f"shift-vs-fd {worst:.2e} (100 cases), GRU bptt "
               f"{gru_worst:.2e}, CNN {report['max_rel_err']:.2e}, "
               f"{elapsed:.1f}s")


def test_criterion_4_brute_force_oracle():
    for n in range(4, 9):
        assert brute_force_max_cut(_complete_graph(n)).c_max == (n * n) // 4
    _report(4, "K4..K8 match floor(n^2/4) exactly")


def test_criterion_5_bilinear_depth_sweep(trained_models):
    start = time.perf_counter()
    cfg = ExperimentConfig(
        experiment="bilinear-sweep", nodes=[8, 10, 12], edge_probs=[0.5],
        instances=10, depth=12,
        gru_checkpoint=trained_models["gru_path"],
        cnn_checkpoint=trained_models["cnn_path"],
    )
    records = run_experiment(cfg)
    finals = {}
    schedules = {}
    for r in records:
        if r.depth == 12:
            finals.setdefault(r.n, []).append(r.ratio)
        schedules.setdefault((r.n, r.seed), {})[r.depth] = r.ratio
    means = {n: float(np.mean(v)) for n, v in finals.items()}
    elapsed = time.perf_counter() - start
    for n in (8, 10, 12):
        assert len(finals[n]) == 10
        assert means[n] >= 0.98, f"n={n}: mean R {means[n]:.4f} < 0.98"
    # soft monotonicity of every per-instance refined ratio sequence
    for key, by_depth in schedules.items():
        seq = [by_depth[d] for d in sorted(by_depth)]
        assert min(np.diff(seq)) > -0.02, f"instance {key}: dip {min(np.diff(seq)):.3f}"
    assert elapsed < 600.0
    _report(5, "depth-12 mean R " + ", ".join(
        f"n={n}: {means[n]:.4f}" for n in (8, 10, 12)) + f", {elapsed:.0f}s")


def test_criterion_6_strategy_comparison(trained_models):
    cfg = ExperimentConfig(
        experiment="strategy-compare", nodes=[8], edge_probs=[0.6],
        instances=10, depth=10,
        gru_checkpoint=trained_models["gru_path"],
        cnn_checkpoint=trained_models["cnn_path"],
    )
    records = run_experiment(cfg)
    bilinear = [r.ratio for r in records if r.method == "bilinear"]
    random_init = [r.ratio for r in records if r.method == "random-init"]
    mean_b = float(np.mean(bilinear))
    mean_r = float(np.mean(random_init))
    assert mean_b >= 0.96
    assert mean_b - mean_r >= 0.03
    _report(6, f"bilinear {mean_b:.4f} vs random-init {mean_r:.4f} "
               f"(margin {(mean_b - mean_r) * 100:.1f}pp)")


def test_criterion_7_depth1_method_ordering(trained_models):
    baselines = ("adam", "rmsprop", "adagrad")
    cfg = ExperimentConfig(
        experiment="depth1-sweep", nodes=list(range(4, 15)),
        edge_probs=[0.5, 0.6, 0.8, 0.9], instances=10, budget=200,
        gru_checkpoint=trained_models["gru_path"],
    )
    records = run_experiment(cfg)
    cells = _cell_means(records, cfg.methods)
    assert len(cells) == 44
    wins = sum(
        1 for per in cells.values()
        if all(per["gru"] >= per[m] for m in baselines)
    )
    fraction = wins / len(cells)
    assert fraction >= 0.70, f"GRU leads on only {wins}/44 cells"
    _report(7, f"GRU >= every baseline on {wins}/44 cells "
               f"({fraction * 100:.0f}%)")


def test_criterion_8_depth2_improvement(trained_models):
    cfg = ExperimentConfig(
        experiment="depth2-compare", nodes=list(range(4, 15)),
        edge_probs=[0.6], instances=10,
        gru_checkpoint=trained_models["gru_path"],
        cnn_checkpoint=trained_models["cnn_path"],
    )
    records = run_experiment(cfg)
    gains = {}
    for n in range(4, 15):
        depth1 = [r.ratio for r in records if r.n == n and r.method == "gru"]
        depth2 = [r.ratio for r in records
                  if r.n == n and r.method == "gru-cnn"]
        assert len(depth1) == len(depth2) == 10
        gains[n] = float(np.mean(depth2)) - float(np.mean(depth1))
        assert gains[n] >= 0.0, f"n={n}: depth-2 mean below depth-1"
    _report(8, "GRU-CNN depth-2 >= GRU depth-1 at every n; min gain "
               f"{min(gains.values()):.4f}, max {max(gains.values()):.4f}")


def test_criterion_9_cnn_training_convergence(trained_models):
    history = trained_models["history"]["cnn_loss"]
    assert len(history) == trained_models["config"].cnn_epochs == 50
    ratio = history[-1] / history[0]
    assert ratio <= 0.5, f"final/first loss ratio {ratio:.3f} > 0.5"
    _report(9, f"CNN loss {history[0]:.4f} -> {history[-1]:.4f} "
               f"(ratio {ratio:.3f}) over 50 epochs")


def test_criterion_10_pipeline_determinism(tmp_path):
    from qaoa_init.bench import TrainConfig, train_models, write_results

    def pipeline(out_dir):
        cfg = TrainConfig(
            master_seed=77, n_train_graphs=4, node_range=(4, 6),
            hidden_dim=4, gru_epochs=2, label_restarts=2, label_budget=30,
            cnn_epochs=2,
        )
        paths = train_models(cfg, str(out_dir))
        bench_cfg = ExperimentConfig(
            experiment="depth1-sweep", nodes=[4, 5], edge_probs=[0.5, 0.7],
            instances=3, budget=15, master_seed=77,
            gru_checkpoint=paths["gru"],
        )
        raw = out_dir / "raw.csv"
        write_results(run_experiment(bench_cfg), raw)
        return raw

    def strip_wall(path):
        lines = path.read_text().splitlines()
        return [",".join(line.split(",")[:-1]) for line in lines]

    raw1 = pipeline(tmp_path / "run1")
    raw2 = pipeline(tmp_path / "run2")
    assert strip_wall(raw1) == strip_wall(raw2)
    ckpt1 = (tmp_path / "run1" / "gru.json").read_bytes()
    ckpt2 = (tmp_path / "run2" / "gru.json").read_bytes()
    assert ckpt1 == ckpt2
    _report(10, "train+bench rerun byte-identical "
                "(wall-clock column excluded)")
