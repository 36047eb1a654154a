"""Word-token vocabulary with PAD/BOS/EOS specials at fixed ids."""

from __future__ import annotations

import numpy as np

PAD_TOKEN = "<PAD>"
BOS_TOKEN = "<BOS>"
EOS_TOKEN = "<EOS>"


class Vocabulary:
    """Ordered tokens: PAD=0, BOS=1, EOS=2, then the content words."""

    def __init__(self, words: list[str]):
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in vocabulary")
        self.tokens = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, *words]
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}

    pad_id = 0
    bos_id = 1
    eos_id = 2

    @classmethod
    def from_word_count(cls, count: int) -> "Vocabulary":
        return cls([f"w{i:02d}" for i in range(count)])

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def content_offset(self) -> int:
        return 3

    @property
    def word_count(self) -> int:
        return len(self.tokens) - 3

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode_words(self, word_indices) -> np.ndarray:
        """Corpus word indices (0-based) -> vocabulary token ids."""
        ids = np.asarray(word_indices, dtype=np.int64) + self.content_offset
        if ids.size and (ids.min() < self.content_offset or ids.max() >= len(self)):
            raise ValueError("word index outside the vocabulary")
        return ids

    def decode_to_words(self, token_ids) -> list[int]:
        """Strip specials and map token ids back to corpus word indices."""
        return [int(t) - self.content_offset for t in token_ids if t >= self.content_offset]
