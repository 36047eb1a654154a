"""The end-to-end recognizer network.

Per clip a 3-layer CNN (batch norm and 2x2 max pooling at every layer,
then a fully connected projection) produces one embedding; a 2-layer
LSTM consumes the clip embeddings in reverse time order; a 2-layer LSTM
decoder with additive attention over the encoder outputs emits word
tokens until EOS. Batches pad sequences and mask both the encoder
steps and the attention scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lipwave.recognizer import autodiff as ad
from lipwave.recognizer.autodiff import BatchNormState, Tensor
from lipwave.recognizer.vocab import Vocabulary

_MASK_SCORE = 1e9


@dataclass
class ModelConfig:
    feature_dim: int
    vocab_size: int
    clip_length: int = 24
    hidden_size: int = 64
    embed_size: int = 32
    cnn_channels: tuple = (8, 16, 32)
    clip_embed_size: int = 64
    init_scale: float = 0.08
    forget_bias: float = 1.0
    seed: int = 0
    dtype: str = "float64"

    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class AttentionStep:
    """One decode step's attention weights and context vector."""

    attention_weights: np.ndarray
    context: np.ndarray


def _pooled(size: int, times: int) -> int:
    for _ in range(times):
        size //= 2
    return size


class Recognizer:
    """Parameter container plus forward passes for training and decoding."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        if config.vocab_size != len(vocab):
            raise ValueError("config vocab_size must match the vocabulary")
        self.config = config
        self.vocab = vocab
        dt = config.np_dtype()
        rng = np.random.default_rng(config.seed)
        s = config.init_scale
        h = config.hidden_size
        e = config.embed_size
        c1, c2, c3 = config.cnn_channels

        def uniform(*shape):
            return rng.uniform(-s, s, shape).astype(dt)

        def lstm_params(input_size):
            wx = uniform(input_size, 4 * h)
            wh = uniform(h, 4 * h)
            b = np.zeros(4 * h, dtype=dt)
            b[h : 2 * h] = config.forget_bias
            return wx, wh, b

        flat = c3 * _pooled(config.clip_length, 3) * _pooled(config.feature_dim, 3)
        if flat == 0:
            raise ValueError("clip shape collapses to zero after three poolings")
        p: dict[str, Tensor] = {}

        def param(name, value):
            p[name] = Tensor(value, requires_grad=True, name=name)

        param("cnn1.w", uniform(c1, 1, 3, 3))
        param("bn1.gamma", np.ones(c1, dtype=dt))
        param("bn1.beta", np.zeros(c1, dtype=dt))
        param("cnn2.w", uniform(c2, c1, 3, 3))
        param("bn2.gamma", np.ones(c2, dtype=dt))
        param("bn2.beta", np.zeros(c2, dtype=dt))
        param("cnn3.w", uniform(c3, c2, 3, 3))
        param("bn3.gamma", np.ones(c3, dtype=dt))
        param("bn3.beta", np.zeros(c3, dtype=dt))
        param("fc.w", uniform(flat, config.clip_embed_size))
        param("fc.b", np.zeros(config.clip_embed_size, dtype=dt))
        for layer, input_size in (("enc1", config.clip_embed_size), ("enc2", h)):
            wx, wh, b = lstm_params(input_size)
            param(f"{layer}.wx", wx)
            param(f"{layer}.wh", wh)
            param(f"{layer}.b", b)
        for layer, input_size in (("dec1", h + e), ("dec2", h)):
            wx, wh, b = lstm_params(input_size)
            param(f"{layer}.wx", wx)
            param(f"{layer}.wh", wh)
            param(f"{layer}.b", b)
        param("attn.w_query", uniform(h, h))
        param("attn.w_keys", uniform(h, h))
        param("attn.v", uniform(h, 1))
        param("embed.table", uniform(config.vocab_size, e))
        param("out.w", uniform(h, config.vocab_size))
        param("out.b", np.zeros(config.vocab_size, dtype=dt))
        self.params = p
        self.bn_states = {name: BatchNormState(ch, dtype=dt)
                          for name, ch in (("bn1", c1), ("bn2", c2), ("bn3", c3))}

    # -- parameters ---------------------------------------------------------

    def named_params(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def copy_param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, v in self.params.items():
            v.data = arrays[k].astype(v.data.dtype).reshape(v.data.shape)

    # -- forward pieces -----------------------------------------------------

    def _cnn(self, clips: Tensor, training: bool) -> Tensor:
        """(N, 1, T, D) clips -> (N, clip_embed_size) vectors."""
        p = self.params
        x = clips
        for i in (1, 2, 3):
            x = ad.conv2d(x, p[f"cnn{i}.w"], p[f"cnn{i}.b"])
            x = ad.batchnorm2d(x, p[f"bn{i}.gamma"], p[f"bn{i}.beta"],
                               self.bn_states[f"bn{i}"], training)
            x = ad.relu(x)
            x = ad.maxpool2(x)
        n = x.data.shape[0]
        flat = ad.reshape(x, (n, -1))
        return ad.relu(ad.add(ad.matmul(flat, p["fc.w"]), p["fc.b"]))

    def encode_batch(self, clips: np.ndarray, lengths: np.ndarray, training: bool) -> Tensor:
        """Run the CNN and the reversed-order encoder over a padded batch.

        clips (B, N, T, D) in natural order with lengths (B,). Returns
        the encoder output matrix O (B, N, H) whose step t holds the
        state after consuming clip len-t (reverse ingestion), so column
        len-1 (and every padded step after it) is the latent o_1.
        """
        b, n_max, t_len, d = clips.shape
        dt = self.config.np_dtype()
        reversed_clips = np.zeros_like(clips)
        for i in range(b):
            n = int(lengths[i])
            reversed_clips[i, :n] = clips[i, :n][::-1]
        mask = (np.arange(n_max)[None, :] < lengths[:, None]).astype(dt)
        flat = Tensor(reversed_clips.reshape(b * n_max, 1, t_len, d).astype(dt))
        f = self._cnn(flat, training)
        f = ad.reshape(f, (b, n_max, -1))
        p = self.params
        h1 = ad.lstm_seq(f, p["enc1.wx"], p["enc1.wh"], p["enc1.b"], mask)
        return ad.lstm_seq(h1, p["enc2.wx"], p["enc2.wh"], p["enc2.b"], mask)

    def attend_batch(self, query: Tensor, outputs: Tensor, keys: Tensor,
                     mask: np.ndarray) -> tuple[Tensor, Tensor]:
        """Additive attention: softmax(v . tanh(W_q q + W_k o_n)) over steps.

        query (B, H); outputs/keys (B, N, H); mask (B, N) with 1.0 on
        real steps. Returns (weights (B, N), context (B, H)).
        """
        p = self.params
        b, n, h = outputs.data.shape
        q = ad.reshape(ad.matmul(query, p["attn.w_query"]), (b, 1, h))
        scores = ad.matmul(ad.tanh(ad.add(keys, q)), p["attn.v"])
        scores = ad.reshape(scores, (b, n))
        scores = ad.add(scores, Tensor(((mask - 1.0) * _MASK_SCORE).astype(scores.data.dtype)))
        alpha = ad.softmax(scores, axis=1)
        context = ad.reshape(ad.matmul(ad.reshape(alpha, (b, 1, n)), outputs), (b, h))
        return alpha, context

    def decode_step_batch(self, states, context: Tensor, emb_prev: Tensor):
        """One decoder step for a batch; returns (logits, new states)."""
        p = self.params
        h1, c1, h2, c2 = states
        x = ad.concat([context, emb_prev], axis=1)
        h1n, c1n = ad.lstm_cell(x, h1, c1, p["dec1.wx"], p["dec1.wh"], p["dec1.b"])
        h2n, c2n = ad.lstm_cell(h1n, h2, c2, p["dec2.wx"], p["dec2.wh"], p["dec2.b"])
        logits = ad.add(ad.matmul(h2n, p["out.w"]), p["out.b"])
        return logits, (h1n, c1n, h2n, c2n)

    def _decoder_init(self, latent: Tensor):
        dt = self.config.np_dtype()
        b, h = latent.data.shape
        zeros = Tensor(np.zeros((b, h), dtype=dt))
        return (latent, zeros, latent, Tensor(np.zeros((b, h), dtype=dt)))

    def teacher_forcing_loss(self, clips: np.ndarray, lengths: np.ndarray,
                             targets: np.ndarray, target_mask: np.ndarray,
                             training: bool = True) -> Tensor:
        """Cross-entropy of the gold tokens under teacher forcing.

        targets (B, U) are gold ids ending with EOS (PAD afterwards);
        the decoder is fed BOS then gold tokens. Loss is the batch mean
        of per-sentence summed negative log probabilities.
        """
        b, u_max = targets.shape
        outputs = self.encode_batch(clips, lengths, training)
        n_max = outputs.data.shape[1]
        attn_mask = (np.arange(n_max)[None, :] < lengths[:, None]).astype(self.config.np_dtype())
        keys = ad.matmul(outputs, self.params["attn.w_keys"])
        latent = ad.take_step(outputs, -1)
        states = self._decoder_init(latent)
        prev_ids = np.full(b, self.vocab.bos_id, dtype=np.int64)
        step_logits = []
        for u in range(u_max):
            emb_prev = ad.embedding(self.params["embed.table"], prev_ids)
            _, context = self.attend_batch(states[2], outputs, keys, attn_mask)
            logits, states = self.decode_step_batch(states, context, emb_prev)
            step_logits.append(ad.reshape(logits, (b, 1, self.config.vocab_size)))
            prev_ids = targets[:, u]
        all_logits = ad.reshape(ad.concat(step_logits, axis=1), (b * u_max, self.config.vocab_size))
        weights = (target_mask.reshape(-1) / float(b)).astype(self.config.np_dtype())
        return ad.cross_entropy(all_logits, targets.reshape(-1), weights)

    # -- single-sample surfaces ----------------------------------------------

    def cnn_forward(self, clip: np.ndarray) -> np.ndarray:
        """Embedding vector of one (T, D) clip, inference mode."""
        t, d = clip.shape
        with ad.no_grad():
            out = self._cnn(Tensor(clip.reshape(1, 1, t, d).astype(self.config.np_dtype())),
                            training=False)
        return out.data[0]

    def encode(self, clips: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Encode one (N, T, D) clip sequence; returns (O (N, H), o_1)."""
        if clips.shape[0] < 1:
            raise ValueError("empty clip sequence")
        n = clips.shape[0]
        with ad.no_grad():
            outputs = self.encode_batch(clips[None], np.array([n]), training=False)
        o = outputs.data[0]
        return o, o[-1].copy()

    def attend(self, prev_hidden: np.ndarray, outputs: np.ndarray) -> AttentionStep:
        """Attention step over an (N, H) encoder output matrix."""
        n = outputs.shape[0]
        with ad.no_grad():
            keys = ad.matmul(Tensor(outputs[None].astype(self.config.np_dtype())),
                             self.params["attn.w_keys"])
            alpha, context = self.attend_batch(
                Tensor(prev_hidden[None].astype(self.config.np_dtype())),
                Tensor(outputs[None].astype(self.config.np_dtype())),
                keys,
                np.ones((1, n)),
            )
        return AttentionStep(alpha.data[0].copy(), context.data[0].copy())

    def decode_step(self, states, context: np.ndarray, prev_embedding: np.ndarray):
        """One inference decode step at batch size one.

        Returns (probability distribution over the vocabulary, states).
        """
        dt = self.config.np_dtype()
        with ad.no_grad():
            logits, new_states = self.decode_step_batch(
                tuple(Tensor(s[None].astype(dt)) if not isinstance(s, Tensor) else s for s in states),
                Tensor(context[None].astype(dt)),
                Tensor(prev_embedding[None].astype(dt)),
            )
            probs = ad.softmax(logits, axis=1)
        return probs.data[0].copy(), tuple(s.data[0].copy() for s in new_states)

    def sentence_loss(self, clips: np.ndarray, target_ids: list[int]):
        """Teacher-forced loss and parameter gradients for one sample.

        target_ids are content tokens; EOS is appended internally.
        Returns (loss value, {param name: gradient array}).
        """
        for t in target_ids:
            if not 0 <= t < self.config.vocab_size:
                raise ValueError(f"target id {t} outside the vocabulary")
        targets = np.array([list(target_ids) + [self.vocab.eos_id]], dtype=np.int64)
        mask = np.ones_like(targets, dtype=np.float64)
        self.zero_grads()
        loss = self.teacher_forcing_loss(
            clips[None].astype(self.config.np_dtype()),
            np.array([clips.shape[0]]),
            targets,
            mask,
            training=True,
        )
        loss.backward()
        grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.data)).copy()
                 for k, v in self.params.items()}
        return float(loss.data), grads
