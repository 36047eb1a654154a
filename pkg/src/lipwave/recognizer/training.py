"""Mini-batch training with Adam, gradient clipping and early stopping.

Batches bucket sequences by clip count to limit padding, pad clips and
targets, and train against the teacher-forced cross-entropy. The log
keeps one record per epoch; everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lipwave.recognizer.network import Recognizer


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SequenceExample:
    """One training sample: segmented clips plus gold content-token ids."""

    clips: np.ndarray  # (N, T, D)
    target_ids: np.ndarray  # vocabulary ids of the content words


@dataclass
class TrainConfig:
    epochs: int = 12
    batch_size: int = 64
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    patience: int = 3
    seed: int = 0
    min_epochs: int = 1


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            p.data = p.data - (self.lr * correction) * self.m[i] / (np.sqrt(self.v[i]) + self.eps)


def clip_gradients(params, max_norm: float) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def build_batch(model: Recognizer, examples: list[SequenceExample]):
    """Pad a list of examples into (clips, lengths, targets, target_mask)."""
    dt = model.config.np_dtype()
    b = len(examples)
    n_max = max(e.clips.shape[0] for e in examples)
    t_len, d = examples[0].clips.shape[1:]
    u_max = max(len(e.target_ids) for e in examples) + 1  # room for EOS
    clips = np.zeros((b, n_max, t_len, d), dtype=dt)
    lengths = np.zeros(b, dtype=np.int64)
    targets = np.full((b, u_max), model.vocab.pad_id, dtype=np.int64)
    mask = np.zeros((b, u_max), dtype=np.float64)
    for i, e in enumerate(examples):
        n = e.clips.shape[0]
        clips[i, :n] = e.clips
        lengths[i] = n
        u = len(e.target_ids)
        targets[i, :u] = e.target_ids
        targets[i, u] = model.vocab.eos_id
        mask[i, : u + 1] = 1.0
    return clips, lengths, targets, mask


def _evaluate_loss(model: Recognizer, examples, batch_size: int) -> float:
    total = 0.0
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        clips, lengths, targets, mask = build_batch(model, chunk)
        loss = model.teacher_forcing_loss(clips, lengths, targets, mask, training=False)
        total += float(loss.data) * len(chunk)
    return total / max(len(examples), 1)


def _epoch_batches(n: int, clip_counts: np.ndarray, batch_size: int,
                   rng: np.random.Generator) -> list[np.ndarray]:
    """Length-bucketed batches in a shuffled order, deterministically."""
    perm = rng.permutation(n)
    by_length = perm[np.argsort(clip_counts[perm], kind="stable")]
    batches = [by_length[i : i + batch_size] for i in range(0, n, batch_size)]
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def train(model: Recognizer, train_set: list,
          val_set: list, config: TrainConfig,
          materialize=None, clip_count=None) -> list[dict]:
    """Train in place; returns the per-epoch log.

    Items may be SequenceExample directly, or lazy descriptors expanded
    per batch by `materialize(item)` (with `clip_count(item)` supplying
    the sequence length used for bucketing). Early stopping watches the
    validation loss; the best-epoch parameters are restored on return.
    """
    if not train_set:
        raise ValueError("empty training set")
    if materialize is None:
        materialize = lambda e: e
    if clip_count is None:
        clip_count = lambda e: materialize(e).clips.shape[0]
    params = [t for _, t in model.named_params()]
    optimizer = Adam(params, lr=config.learning_rate)
    clip_counts = np.array([clip_count(e) for e in train_set])
    log: list[dict] = []
    best_val = np.inf
    best_params = model.copy_param_arrays()
    best_bn = {k: (s.mean.copy(), s.var.copy()) for k, s in model.bn_states.items()}
    stall = 0
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, 7, epoch])
        total = 0.0
        seen = 0
        for batch_idx in _epoch_batches(len(train_set), clip_counts, config.batch_size, rng):
            examples = [materialize(train_set[i]) for i in batch_idx]
            clips, lengths, targets, mask = build_batch(model, examples)
            model.zero_grads()
            loss = model.teacher_forcing_loss(clips, lengths, targets, mask, training=True)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch} after {seen} samples"
                )
            loss.backward()
            clip_gradients(params, config.clip_norm)
            optimizer.step()
            total += value * len(examples)
            seen += len(examples)
        val_loss = _evaluate_loss(model, [materialize(e) for e in val_set], config.batch_size) \
            if val_set else float("nan")
        log.append({"epoch": epoch, "train_loss": total / max(seen, 1), "val_loss": val_loss})
        if val_set:
            if not np.isfinite(val_loss):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
            if val_loss < best_val - 1e-6:
                best_val = val_loss
                best_params = model.copy_param_arrays()
                best_bn = {k: (s.mean.copy(), s.var.copy()) for k, s in model.bn_states.items()}
                stall = 0
            else:
                stall += 1
                if stall > config.patience and epoch + 1 >= config.min_epochs:
                    break
    if val_set:
        model.load_param_arrays(best_params)
        for k, s in model.bn_states.items():
            s.mean, s.var = best_bn[k][0].copy(), best_bn[k][1].copy()
    return log
