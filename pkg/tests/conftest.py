import json
import os

import pytest

CACHE_DIR = os.path.join(os.path.dirname(__file__), "_model_cache")


@pytest.fixture(scope="session")
def trained_models():
    """Default-config GRU + CNN, trained once and cached on disk.

    Training the full pipeline takes several minutes; delete
    tests/_model_cache to force a retrain.
    """
    from qaoa_init.bench import (TrainConfig, load_cnn_checkpoint,
                                 load_gru_checkpoint, train_models)

    cfg = TrainConfig()
    paths = {
        "gru": os.path.join(CACHE_DIR, "gru.json"),
        "cnn": os.path.join(CACHE_DIR, "cnn.json"),
        "history": os.path.join(CACHE_DIR, "training_history.json"),
    }
    if not all(os.path.exists(p) for p in paths.values()):
        train_models(cfg, CACHE_DIR)
    gru, gru_meta = load_gru_checkpoint(paths["gru"])
    if (gru_meta.get("epochs") != cfg.gru_epochs
            or gru_meta.get("seed") != cfg.master_seed
            or gru.hidden_dim != cfg.hidden_dim):
        train_models(cfg, CACHE_DIR)  # stale cache
        gru, gru_meta = load_gru_checkpoint(paths["gru"])
    cnn, _ = load_cnn_checkpoint(paths["cnn"])
    with open(paths["history"]) as fh:
        history = json.load(fh)
    return {
        "config": cfg,
        "gru": gru,
        "cnn": cnn,
        "history": history,
        "gru_path": paths["gru"],
        "cnn_path": paths["cnn"],
    }
