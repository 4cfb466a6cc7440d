"""History register and the pair-pattern strategy space.

A pattern is the integer value of the m most recent price-change bits
(most recent bit in the lowest position).  A pair strategy is an ordered
pair (buy_pattern, sell_pattern) of distinct patterns.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ZeroBitRule
from .rng import Stream


def pattern_count(memory: int) -> int:
    return 1 << memory


def enumerate_strategy_space(memory: int) -> list[tuple[int, int]]:
    """All ordered pairs of distinct patterns; length 2^m * (2^m - 1)."""
    if memory < 1:
        raise ValueError("memory must be >= 1")
    p = pattern_count(memory)
    return [(mu, nu) for mu in range(p) for nu in range(p) if nu != mu]


def pair_from_index(k: int, p: int) -> tuple[int, int]:
    """Map a flat index in [0, p*(p-1)) to an ordered distinct pair.

    Same enumeration order as :func:`enumerate_strategy_space`; this is the
    mapping both engines use when drawing strategies.
    """
    mu, j = divmod(k, p - 1)
    nu = j + 1 if j >= mu else j
    return mu, nu


def history_push(value: int, bit: int, memory: int) -> int:
    """Shift one bit into the register: ((value << 1) | bit) mod 2^m."""
    return ((value << 1) | bit) & (pattern_count(memory) - 1)


def return_to_bit(r: float, last_bit: int, rule: ZeroBitRule, stream: Stream) -> int:
    """Sign bit of a price-change signal: 1 if positive, 0 if negative.

    An exact zero is resolved by the configured rule; RANDOM_BIT consumes one
    draw from the run stream, REUSE_LAST repeats the previous bit.
    """
    if r > 0:
        return 1
    if r < 0:
        return 0
    if rule is ZeroBitRule.REUSE_LAST:
        return last_bit
    return stream.randint(2)


@dataclass
class HistoryRegister:
    """The m most recent price-change bits packed as an integer."""

    value: int
    memory: int

    def push(self, bit: int) -> "HistoryRegister":
        return HistoryRegister(history_push(self.value, bit, self.memory), self.memory)
