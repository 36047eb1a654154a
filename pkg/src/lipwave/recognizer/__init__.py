"""End-to-end recognizer: clip CNN, reversed-order recurrent encoder,
attention decoder, training loop and beam search, all built on a small
reverse-mode autodiff layer."""

from lipwave.recognizer.vocab import Vocabulary
from lipwave.recognizer.network import ModelConfig, Recognizer
from lipwave.recognizer.beam import Hypothesis, beam_search, greedy_decode
from lipwave.recognizer.training import TrainConfig, TrainingDiverged, train

__all__ = [
    "Vocabulary",
    "ModelConfig",
    "Recognizer",
    "Hypothesis",
    "beam_search",
    "greedy_decode",
    "TrainConfig",
    "TrainingDiverged",
    "train",
]
