"""Length-bounded beam search over decoder step probabilities.

Hypotheses accumulate per-step log probabilities; one ends when it
emits EOS or after max_len steps. The best terminated hypothesis wins,
ties broken by shorter sequence, then lexicographically lower token
ids. Width 1 reduces to greedy decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lipwave.recognizer import autodiff as ad
from lipwave.recognizer.autodiff import Tensor
from lipwave.recognizer.network import Recognizer


@dataclass
class Hypothesis:
    token_ids: list[int]
    log_prob: float
    terminated: bool

    def sort_key(self):
        return (-self.log_prob, len(self.token_ids), tuple(self.token_ids))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _encode_for_decoding(model: Recognizer, clips: np.ndarray):
    n = clips.shape[0]
    dt = model.config.np_dtype()
    outputs = model.encode_batch(clips[None].astype(dt), np.array([n]), training=False)
    keys = ad.matmul(outputs, model.params["attn.w_keys"])
    return outputs.data[0], keys.data[0]


def _step_beams(model: Recognizer, outputs, keys, states, prev_ids):
    """Advance every beam one decoder step; returns (log_probs, new states)."""
    dt = model.config.np_dtype()
    b = len(prev_ids)
    out_b = Tensor(np.repeat(outputs[None], b, axis=0))
    keys_b = Tensor(np.repeat(keys[None], b, axis=0))
    mask = np.ones((b, outputs.shape[0]))
    emb = ad.embedding(model.params["embed.table"], np.asarray(prev_ids, dtype=np.int64))
    _, context = model.attend_batch(states[2], out_b, keys_b, mask)
    logits, new_states = model.decode_step_batch(states, context, emb)
    return _log_softmax(logits.data.astype(np.float64)), new_states


def beam_search(model: Recognizer, clips: np.ndarray, beam_width: int = 4,
                max_len: int = 8) -> Hypothesis:
    """Best terminated hypothesis for one (N, T, D) clip sequence."""
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    eos = model.vocab.eos_id
    with ad.no_grad():
        outputs, keys = _encode_for_decoding(model, clips)
        dt = model.config.np_dtype()
        latent = Tensor(outputs[-1][None].astype(dt))
        zeros = np.zeros_like(latent.data)
        states = (latent, Tensor(zeros.copy()), latent, Tensor(zeros.copy()))
        beams = [([], 0.0, model.vocab.bos_id, 0)]  # ids, logp, prev token, state row
        finished: list[Hypothesis] = []
        for step in range(max_len):
            log_probs, new_states = _step_beams(
                model, outputs, keys, states, [b[2] for b in beams]
            )
            candidates = []
            for row, (ids, logp, _, _) in enumerate(beams):
                for tok in range(log_probs.shape[1]):
                    candidates.append((logp + log_probs[row, tok], tok, row, ids))
            candidates.sort(key=lambda cand: (-cand[0], cand[1], cand[2]))
            kept = candidates[:beam_width]
            next_beams = []
            rows = []
            for score, tok, row, ids in kept:
                if tok == eos:
                    finished.append(Hypothesis(ids + [tok], score, True))
                else:
                    next_beams.append((ids + [tok], score, tok, len(rows)))
                    rows.append(row)
            if not next_beams:
                break
            states = tuple(Tensor(s.data[rows]) for s in new_states)
            beams = next_beams
        else:
            finished.extend(Hypothesis(ids, logp, True) for ids, logp, _, _ in beams)
    return min(finished, key=Hypothesis.sort_key)


def greedy_decode(model: Recognizer, clips: np.ndarray, max_len: int = 8) -> Hypothesis:
    """Argmax decoding; definitionally beam_search with width one."""
    eos = model.vocab.eos_id
    with ad.no_grad():
        outputs, keys = _encode_for_decoding(model, clips)
        dt = model.config.np_dtype()
        latent = Tensor(outputs[-1][None].astype(dt))
        zeros = np.zeros_like(latent.data)
        states = (latent, Tensor(zeros.copy()), latent, Tensor(zeros.copy()))
        ids: list[int] = []
        logp = 0.0
        prev = model.vocab.bos_id
        for _ in range(max_len):
            log_probs, new_states = _step_beams(model, outputs, keys, states, [prev])
            tok = int(log_probs[0].argmax())
            logp += float(log_probs[0, tok])
            states = new_states
            prev = tok
            if tok == eos:
                return Hypothesis(ids + [tok], logp, True)
            ids.append(tok)
    return Hypothesis(ids, logp, True)
