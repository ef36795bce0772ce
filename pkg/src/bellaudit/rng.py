"""Counter-based random streams keyed by (seed, trial index, role).

Every trial owns one Philox block (four 64-bit words) per role. The block
for trial ``t`` is addressed directly through the Philox counter, so a
chunk of trials can be generated anywhere, in any order, by any worker,
and always yields the same words.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

SETTINGS = 0
SOURCE = 1
NOISE = 2
ROLES = {"settings": SETTINGS, "source": SOURCE, "noise": NOISE}

WORDS_PER_TRIAL = 4
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


def normalize_seed(seed: int) -> int:
    """Reduce any Python int to an unsigned 64-bit key."""
    return int(seed) & _MASK64


def trial_words(seed: int, role: int, start: int, stop: int) -> np.ndarray:
    """Random words for trials ``start..stop-1``, shape ``(stop - start, 4)``, uint64."""
    if stop < start or start < 0:
        raise ValueError(f"bad trial range [{start}, {stop})")
    key = np.array([normalize_seed(seed), role], dtype=np.uint64)
    counter = np.array([start, 0, 0, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=key, counter=counter)
    return bitgen.random_raw((stop - start) * WORDS_PER_TRIAL).reshape(-1, WORDS_PER_TRIAL)


def to_uniform(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def to_bit(words: np.ndarray) -> np.ndarray:
    """Top bit of each word as int64 0/1."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(63)).astype(np.int64)


class TrialStream:
    """The random words available to a single trial.

    Models receive one of these in the per-trial interface; it hands out the
    same numbers that the vectorized path reads from :func:`trial_words`.
    """

    def __init__(self, seed: int, index: int):
        self.seed = normalize_seed(seed)
        self.index = int(index)

    def __repr__(self):
        return f"TrialStream(seed={self.seed}, index={self.index})"

    @cached_property
    def _blocks(self) -> np.ndarray:
        return np.stack(
            [trial_words(self.seed, role, self.index, self.index + 1)[0] for role in (SETTINGS, SOURCE, NOISE)]
        )

    def words(self, role: int) -> np.ndarray:
        return self._blocks[role]

    def uniform(self, role: int, k: int) -> float:
        return float(to_uniform(self._blocks[role, k]))

    def bit(self, role: int, k: int) -> int:
        return int(to_bit(self._blocks[role, k]))
