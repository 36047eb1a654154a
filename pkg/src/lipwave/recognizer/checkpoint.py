"""Versioned model checkpoints on the shared binary container.

The header records the model configuration, vocabulary, parameter
declaration order and any pipeline extras (feature choice, clip
geometry, normalizer statistics); tensor bodies follow as little-endian
float64 in the declared order, batch-norm running statistics included.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import numpy as np

from lipwave.containers import read_container, write_container
from lipwave.recognizer.network import ModelConfig, Recognizer
from lipwave.recognizer.vocab import Vocabulary


def save_checkpoint(path: str | Path, model: Recognizer, extra: dict | None = None) -> None:
    arrays = [(name, tensor.data.astype(np.float64)) for name, tensor in model.named_params()]
    for name, state in model.bn_states.items():
        arrays.append((f"{name}.running_mean", state.mean.astype(np.float64)))
        arrays.append((f"{name}.running_var", state.var.astype(np.float64)))
    config = asdict(model.config)
    config["cnn_channels"] = list(config["cnn_channels"])
    header = {
        "model_config": config,
        "vocab_words": model.vocab.tokens[model.vocab.content_offset :],
        "param_names": [name for name, _ in model.named_params()],
        "extra": extra or {},
    }
    write_container(path, "checkpoint", header, arrays)


def load_checkpoint(path: str | Path) -> tuple[Recognizer, dict]:
    """Rebuild the recognizer; returns (model, extra header dict)."""
    _, header, arrays = read_container(path, "checkpoint")
    cfg = dict(header["model_config"])
    cfg["cnn_channels"] = tuple(cfg["cnn_channels"])
    config = ModelConfig(**cfg)
    model = Recognizer(config, Vocabulary(header["vocab_words"]))
    model.load_param_arrays({name: arrays[name] for name in header["param_names"]})
    for name, state in model.bn_states.items():
        state.mean = arrays[f"{name}.running_mean"].astype(config.np_dtype())
        state.var = arrays[f"{name}.running_var"].astype(config.np_dtype())
    return model, header["extra"]
