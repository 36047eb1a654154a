"""Acoustic lip sensing at desk scale.

Transmit a superposition of inaudible continuous waves, demodulate the
reflections with a coherent detector, turn unwrapped phase into delta
features, and decode word sequences with an attention encoder-decoder.
A built-in multipath channel simulator supplies labeled corpora with
exact per-path ground truth.
"""

from lipwave.backend import active_backend, set_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "set_backend", "__version__"]
