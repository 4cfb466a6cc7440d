"""Trader kinds and their decision / scoring rules.

Three kinds share the market:

* pair-pattern traders: each owns S ordered (buy_pattern, sell_pattern)
  strategies with virtual scores.  When flat, the trader adopts the
  highest-score strategy; the position opens on whichever of its two patterns
  occurs first and closes on the other.  At most one share is ever held.
* MG traders: full lookup tables over all patterns, trading every step with
  the best-scoring table.
* producers: a single fixed table, trading every step.

These plain-Python objects are the reference semantics; the compiled kernel
in ``_kernel`` implements the same rules on flat arrays and is required to
match this module draw-for-draw and bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .rng import Stream

# pending-episode codes for pair strategy bookkeeping
PEND_NONE = 0
PEND_BUY = 1   # buy pattern seen, waiting for the sell pattern
PEND_SELL = 2  # sell pattern seen, waiting for the buy pattern


class TraderKind(IntEnum):
    PAIR = 0
    MG = 1
    PRODUCER = 2


@dataclass
class PairStrategy:
    """Ordered pattern pair with its virtual score.

    ``pending``/``pending_price`` track the last unmatched occurrence of one
    of the two patterns and the mid price one step after it.
    """

    buy_pattern: int
    sell_pattern: int
    score: float = 0.0
    pending: int = PEND_NONE
    pending_price: float = 0.0


@dataclass
class MGStrategy:
    table: np.ndarray  # action in {-1,+1} for each pattern
    score: float = 0.0


@dataclass
class TraderState:
    kind: TraderKind
    strategies: list
    position: int = 0          # -1, 0, +1
    open_price: float = 0.0    # mid price one step after opening (valid iff position != 0)
    open_strategy: int = -1    # index of the strategy that opened the position
    open_time: int = -1
    wealth: float = 0.0
    age: int = 0
    switch_count: int = 0
    last_selected: int = -1    # strategy adopted at the last flat decision
    original: bool = True      # still the trader created at game start


def _select_best(scores: list[float], stream: Stream) -> int:
    """Index of the max score; ties broken uniformly (one draw iff tied)."""
    best = scores[0]
    for sc in scores[1:]:
        if sc > best:
            best = sc
    tied = [s for s, sc in enumerate(scores) if sc == best]
    if len(tied) > 1:
        return tied[stream.randint(len(tied))]
    return tied[0]


def pair_trader_act(trader: TraderState, u: int, stream: Stream) -> int:
    """Decision of a pair-pattern trader for history u.

    Flat: re-select the best strategy (counting a switch when its identity
    changed since the previous flat decision) and open on a matching pattern.
    Holding: only the complementary pattern of the opening strategy closes;
    the position transition itself (and the open/close price, known only
    after the price advances) is applied by the engine.
    """
    if trader.position == 0:
        sel = _select_best([s.score for s in trader.strategies], stream)
        if trader.last_selected >= 0 and sel != trader.last_selected:
            trader.switch_count += 1
        trader.last_selected = sel
        strat = trader.strategies[sel]
        if u == strat.buy_pattern:
            return 1
        if u == strat.sell_pattern:
            return -1
        return 0
    strat = trader.strategies[trader.open_strategy]
    comp = strat.sell_pattern if trader.position > 0 else strat.buy_pattern
    return -trader.position if u == comp else 0


def pair_score_update(strategy: PairStrategy, u: int, mid_price_next: float) -> PairStrategy:
    """Virtual-score bookkeeping for one pattern occurrence.

    A first (or repeated) occurrence of either pattern stakes the episode at
    the current mid price; the complementary pattern closes it and credits
    the round-trip profit with the buy/sell orientation.
    """
    if u == strategy.buy_pattern:
        code = PEND_BUY
    elif u == strategy.sell_pattern:
        code = PEND_SELL
    else:
        return strategy
    if strategy.pending == PEND_NONE or strategy.pending == code:
        strategy.pending = code
        strategy.pending_price = mid_price_next
    else:
        if code == PEND_SELL:  # bought first, now selling
            strategy.score += mid_price_next - strategy.pending_price
        else:                  # sold first, now buying back
            strategy.score += strategy.pending_price - mid_price_next
        strategy.pending = PEND_NONE
    return strategy


def mg_trader_act(trader: TraderState, u: int, stream: Stream) -> int:
    """Action of an MG trader or producer: always active."""
    if trader.kind == TraderKind.PRODUCER:
        return int(trader.strategies[0].table[u])
    sel = _select_best([s.score for s in trader.strategies], stream)
    if trader.last_selected >= 0 and sel != trader.last_selected:
        trader.switch_count += 1
    trader.last_selected = sel
    return int(trader.strategies[sel].table[u])


def mg_score_update(strategy: MGStrategy, u_prev: int, price_change: float) -> MGStrategy:
    """Minority-style virtual payoff of the strategy's own prescription."""
    strategy.score -= float(strategy.table[u_prev]) * price_change
    return strategy
