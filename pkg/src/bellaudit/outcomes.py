"""Potential-outcome quadruples and the parity lemma.

A quadruple holds the four outcomes a local realistic model assigns to one
trial: ``x1, x2`` (left wing under settings 1 and 2) and ``y1, y2`` (right
wing). Field order is always ``(x1, x2, y1, y2)``, in memory and on disk.
Outcomes are the Python ints +1 and -1 so that products and comparisons are
exact.
"""

from __future__ import annotations

import itertools
import numbers
from typing import Iterator, NamedTuple

OUTCOMES = (1, -1)
SETTINGS = (1, 2)
SETTING_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


def _is_int(value) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def check_outcome(value) -> int:
    if not _is_int(value) or value not in OUTCOMES:
        raise ValueError(f"outcome must be +1 or -1, got {value!r}")
    return int(value)


def check_setting(label) -> int:
    if not _is_int(label) or label not in SETTINGS:
        raise ValueError(f"setting label must be 1 or 2, got {label!r}")
    return int(label)


class Quadruple(NamedTuple):
    x1: int
    x2: int
    y1: int
    y2: int

    @classmethod
    def of(cls, x1, x2, y1, y2) -> Quadruple:
        """Build a quadruple, rejecting anything that is not exactly +1/-1."""
        return cls(*(check_outcome(v) for v in (x1, x2, y1, y2)))

    def x(self, a: int) -> int:
        return self.x1 if a == 1 else self.x2

    def y(self, b: int) -> int:
        return self.y1 if b == 1 else self.y2

    def code(self) -> int:
        """Index in ``0..15``; bit k is set when field k (in x1, x2, y1, y2 order) is -1."""
        return sum(1 << k for k, v in enumerate(self) if v == -1)

    @classmethod
    def from_code(cls, code: int) -> Quadruple:
        if not 0 <= code < 16:
            raise ValueError(f"quadruple code out of range: {code}")
        return cls(*(-1 if code >> k & 1 else 1 for k in range(4)))


def equality_count(q: Quadruple) -> int:
    """Number of the four cross-wing pairs (X_i, Y_j) that agree; always 0, 2 or 4."""
    return sum(q.x(i) == q.y(j) for i, j in SETTING_PAIRS)


def delta(q: Quadruple) -> int:
    """``1{X1=Y2} - 1{X1=Y1} - 1{X2=Y1} - 1{X2=Y2}``; takes only the values 0 and -2."""
    return (
        int(q.x1 == q.y2)
        - int(q.x1 == q.y1)
        - int(q.x2 == q.y1)
        - int(q.x2 == q.y2)
    )


def product_identity_holds(q: Quadruple) -> bool:
    return q.x1 * q.y2 == (q.x1 * q.y1) * (q.x2 * q.y1) * (q.x2 * q.y2)


def select_actual(q: Quadruple, a: int, b: int) -> tuple[int, int]:
    """Return the outcomes actually observed, ``(X_a, Y_b)``."""
    return q.x(check_setting(a)), q.y(check_setting(b))


def iter_quadruples() -> Iterator[Quadruple]:
    for values in itertools.product(OUTCOMES, repeat=4):
        yield Quadruple(*values)


def enumerate_quadruples() -> list[Quadruple]:
    return list(iter_quadruples())
