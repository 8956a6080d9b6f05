import numpy as np

from operator_moduli.errors import ArgumentError

__all__ = ["rng"]


def rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator used for every random draw in the package.

    `stream` selects an independent sub-stream (instance index, restart index, ...) so that
    per-instance work is reproducible regardless of execution order.
    """
    if seed < 0 or any(s < 0 for s in stream):
        raise ArgumentError(f"Seeds must be nonnegative, got {seed} / {stream}")
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(sequence))
