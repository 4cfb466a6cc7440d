"""The simulation engine.

One run is strictly sequential.  Each step, in this order:

1. every trader decides an action from the current history u (pair traders in
   index order, then MG traders, then producers; random tie-breaks consume
   the run stream in exactly this order),
2. the excess demand A is summed and the mid price advances through the
   configured impact function,
3. positions open/close at the new mid price (wealth updates and the trade
   ledger on closes; pair traders close to flat, table traders flip),
4. every pair strategy's virtual score and every MG score updates against the
   new mid price,
5. one bit (sign of A or of the return, per config) shifts into the history
   register (a zero signal resolves per the zero-bit rule, possibly consuming
   one draw),
6. ages increment and, on evolution-interval boundaries, the poorest trader
   is replaced.

Two interchangeable backends implement this protocol: a plain-Python
reference (this module) and a compiled kernel (``_kernel``).  They share the
initial strategy draws and the RNG stream and must agree bit-for-bit; the
test suite enforces this on small runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import (
    HistorySource,
    ImpactKind,
    MgScoreMode,
    SimConfig,
    ZeroBitRule,
)
from .impact import impact_return
from .patterns import history_push, pair_from_index, return_to_bit
from .rng import Stream
from .traders import (
    MGStrategy,
    PairStrategy,
    TraderKind,
    TraderState,
    mg_score_update,
    mg_trader_act,
    pair_score_update,
    pair_trader_act,
)

TRADE_DTYPE = np.dtype(
    [
        ("trader_id", np.int64),
        ("open_t", np.int64),
        ("close_t", np.int64),
        ("direction", np.int8),
        ("open_price", np.float64),
        ("close_price", np.float64),
    ]
)


@dataclass
class TradeRecord:
    trader_id: int
    open_t: int
    close_t: int
    direction: int
    open_price: float
    close_price: float


@dataclass
class RunOutput:
    """Everything a run produces.

    Series cover the *full* run (warmup included) so the wealth-sum oracle
    can integrate from game start; the ``rec_*`` views expose the recorded
    (post-warmup) portion that statistics are computed on.  ``price`` has one
    more entry than the per-step series (price[t+1] is the mid price one step
    after step t).
    """

    config: SimConfig
    run_seed: int
    warmup: int
    steps_done: int
    price: np.ndarray
    returns: np.ndarray
    excess_demand: np.ndarray
    history: np.ndarray
    survivors: np.ndarray
    active_pair: np.ndarray
    active_mg: np.ndarray
    active_prod: np.ndarray
    trades: np.ndarray  # TRADE_DTYPE, times absolute from game start
    trader_kind: np.ndarray
    wealth: np.ndarray
    age: np.ndarray
    switch_count: np.ndarray
    original: np.ndarray
    position: np.ndarray
    open_time: np.ndarray
    open_price: np.ndarray
    final_rng_state: int

    @property
    def steps_recorded(self) -> int:
        return max(self.steps_done - self.warmup, 0)

    @property
    def rec_returns(self) -> np.ndarray:
        return self.returns[self.warmup : self.steps_done]

    @property
    def rec_excess_demand(self) -> np.ndarray:
        return self.excess_demand[self.warmup : self.steps_done]

    @property
    def rec_history(self) -> np.ndarray:
        return self.history[self.warmup : self.steps_done]

    @property
    def rec_price(self) -> np.ndarray:
        return self.price[self.warmup : self.steps_done + 1]

    def equals(self, other: "RunOutput") -> bool:
        """Exact (bit-level) equality of all logged data."""
        if self.config != other.config or self.run_seed != other.run_seed:
            return False
        if self.steps_done != other.steps_done:
            return False
        array_fields = (
            "price",
            "returns",
            "excess_demand",
            "history",
            "survivors",
            "active_pair",
            "active_mg",
            "active_prod",
            "trades",
            "trader_kind",
            "wealth",
            "age",
            "switch_count",
            "original",
            "position",
            "open_time",
            "open_price",
        )
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in array_fields
        )


def draw_pair_strategy_set(stream: Stream, p: int, s_per_trader: int) -> list[tuple[int, int]]:
    """Draw S distinct ordered pattern pairs, uniformly without replacement.

    Rejection sampling over the flat pair index; both backends use this exact
    procedure (and draw order) at game start and on evolution replacement.
    """
    pairs: list[tuple[int, int]] = []
    n_space = p * (p - 1)
    for _ in range(s_per_trader):
        while True:
            pair = pair_from_index(stream.randint(n_space), p)
            if pair not in pairs:
                break
        pairs.append(pair)
    return pairs


def _draw_mg_table(stream: Stream, p: int) -> np.ndarray:
    table = np.empty(p, dtype=np.int8)
    for u in range(p):
        table[u] = 1 if stream.randint(2) == 1 else -1
    return table


def initial_draws(config: SimConfig, stream: Stream):
    """Game-start draws, in documented order: pair strategies (trader index
    order), MG tables, producer tables, then the initial history register."""
    p = config.pattern_count
    s = config.s_per_trader
    buy = np.zeros((config.n_pair, s), dtype=np.int64)
    sell = np.zeros((config.n_pair, s), dtype=np.int64)
    for i in range(config.n_pair):
        for j, (mu, nu) in enumerate(draw_pair_strategy_set(stream, p, s)):
            buy[i, j] = mu
            sell[i, j] = nu
    mg_table = np.zeros((config.n_mg, s, p), dtype=np.int8)
    for i in range(config.n_mg):
        for j in range(s):
            mg_table[i, j] = _draw_mg_table(stream, p)
    prod_table = np.zeros((config.n_prod, p), dtype=np.int8)
    for i in range(config.n_prod):
        prod_table[i] = _draw_mg_table(stream, p)
    hist0 = stream.randint(p)
    return buy, sell, mg_table, prod_table, hist0


class ReferenceEngine:
    """Plain-Python engine over TraderState objects; the semantics oracle."""

    def __init__(self, config: SimConfig, stream: Stream,
                 buy: np.ndarray, sell: np.ndarray,
                 mg_table: np.ndarray, prod_table: np.ndarray, hist0: int):
        self.config = config
        self.stream = stream
        self.p_count = config.pattern_count
        self.traders: list[TraderState] = []
        for i in range(config.n_pair):
            strategies = [
                PairStrategy(int(buy[i, s]), int(sell[i, s]))
                for s in range(config.s_per_trader)
            ]
            self.traders.append(TraderState(TraderKind.PAIR, strategies))
        for i in range(config.n_mg):
            strategies = [
                MGStrategy(mg_table[i, s].copy()) for s in range(config.s_per_trader)
            ]
            self.traders.append(TraderState(TraderKind.MG, strategies))
        for i in range(config.n_prod):
            self.traders.append(
                TraderState(TraderKind.PRODUCER, [MGStrategy(prod_table[i].copy())])
            )
        self.history = hist0
        self.last_bit = hist0 & 1
        self.price = 0.0
        self.a_prev = 0
        self.t = 0
        self.survivor_count = len(self.traders)
        self.trades: list[TradeRecord] = []
        # per-step logs
        self.log_price = [0.0]
        self.log_return: list[float] = []
        self.log_a: list[int] = []
        self.log_history: list[int] = []
        self.log_survivors: list[int] = []
        self.log_active = {TraderKind.PAIR: [], TraderKind.MG: [], TraderKind.PRODUCER: []}

    def step(self) -> None:
        cfg = self.config
        u = self.history
        actions: list[int] = []
        a_total = 0
        counts = {TraderKind.PAIR: 0, TraderKind.MG: 0, TraderKind.PRODUCER: 0}
        for tr in self.traders:
            if tr.kind == TraderKind.PAIR:
                act = pair_trader_act(tr, u, self.stream)
            else:
                act = mg_trader_act(tr, u, self.stream)
            actions.append(act)
            a_total += act
            if act != 0:
                counts[tr.kind] += 1
        r = impact_return(a_total, self.a_prev, cfg.impact_kind)
        p_next = self.price + r
        # position transitions at the new mid price.  Pair traders close to
        # flat; table traders (MG, producer) hold one share at all times, so a
        # sign flip closes the round trip and reopens in the new direction.
        for i, tr in enumerate(self.traders):
            act = actions[i]
            if act == 0:
                continue
            if tr.position == 0:
                tr.position = act
                if tr.kind == TraderKind.PAIR:
                    tr.open_strategy = tr.last_selected
                tr.open_price = p_next
                tr.open_time = self.t
            elif tr.kind == TraderKind.PAIR or act == -tr.position:
                d = tr.position
                tr.wealth += d * (p_next - tr.open_price)
                self.trades.append(
                    TradeRecord(i, tr.open_time, self.t, d, tr.open_price, p_next)
                )
                if tr.kind == TraderKind.PAIR:
                    tr.position = 0
                    tr.open_strategy = -1
                    tr.open_time = -1
                else:
                    tr.position = act
                    tr.open_price = p_next
                    tr.open_time = self.t
        # virtual scores
        for i, tr in enumerate(self.traders):
            if tr.kind == TraderKind.PAIR:
                for strat in tr.strategies:
                    pair_score_update(strat, u, p_next)
            elif tr.kind == TraderKind.MG:
                if cfg.mg_score_mode is MgScoreMode.PER_STRATEGY:
                    for strat in tr.strategies:
                        mg_score_update(strat, u, r)
                else:
                    for strat in tr.strategies:
                        strat.score -= actions[i] * r
        # logs
        self.log_a.append(a_total)
        self.log_return.append(r)
        self.log_price.append(p_next)
        self.log_history.append(u)
        for kind in counts:
            self.log_active[kind].append(counts[kind])
        # history register
        sig = float(a_total) if cfg.history_source is HistorySource.EXCESS_DEMAND_SIGN else r
        bit = return_to_bit(sig, self.last_bit, cfg.zero_bit_rule, self.stream)
        self.last_bit = bit
        self.history = history_push(self.history, bit, cfg.memory)
        # ages
        for tr in self.traders:
            tr.age += 1
        self.price = p_next
        self.a_prev = a_total
        self.t += 1
        if cfg.evolution_interval > 0 and self.t % cfg.evolution_interval == 0:
            self.evolve()
        self.log_survivors.append(self.survivor_count)

    def evolve(self) -> None:
        """Replace the poorest trader with a fresh pair-pattern trader whose
        wealth is the population mean taken before removal."""
        traders = self.traders
        total = 0.0
        for tr in traders:
            total += tr.wealth
        mean_wealth = total / len(traders)
        min_wealth = traders[0].wealth
        for tr in traders[1:]:
            if tr.wealth < min_wealth:
                min_wealth = tr.wealth
        tied = [i for i, tr in enumerate(traders) if tr.wealth == min_wealth]
        victim = tied[self.stream.randint(len(tied))] if len(tied) > 1 else tied[0]
        tr = traders[victim]
        if tr.original:
            tr.original = False
            self.survivor_count -= 1
        pairs = draw_pair_strategy_set(self.stream, self.p_count, self.config.s_per_trader)
        tr.strategies = [PairStrategy(mu, nu) for mu, nu in pairs]
        tr.position = 0  # open position annulled, no closing trade
        tr.open_strategy = -1
        tr.open_price = 0.0
        tr.open_time = -1
        tr.wealth = mean_wealth
        tr.age = 0
        tr.switch_count = 0
        tr.last_selected = -1


def _run_python(config: SimConfig, stream: Stream, draws, stop_when_survivors_leq: int) -> dict:
    buy, sell, mg_table, prod_table, hist0 = draws
    eng = ReferenceEngine(config, stream, buy, sell, mg_table, prod_table, hist0)
    total = config.warmup + config.steps
    for _ in range(total):
        eng.step()
        if 0 < stop_when_survivors_leq and eng.survivor_count <= stop_when_survivors_leq:
            break
    steps_done = eng.t
    n = len(eng.traders)
    trades = np.zeros(len(eng.trades), dtype=TRADE_DTYPE)
    for k, rec in enumerate(eng.trades):
        trades[k] = (rec.trader_id, rec.open_t, rec.close_t, rec.direction,
                     rec.open_price, rec.close_price)
    return dict(
        steps_done=steps_done,
        price=np.array(eng.log_price),
        returns=np.array(eng.log_return),
        excess_demand=np.array(eng.log_a, dtype=np.int64),
        history=np.array(eng.log_history, dtype=np.int64),
        survivors=np.array(eng.log_survivors, dtype=np.int64),
        active_pair=np.array(eng.log_active[TraderKind.PAIR], dtype=np.int64),
        active_mg=np.array(eng.log_active[TraderKind.MG], dtype=np.int64),
        active_prod=np.array(eng.log_active[TraderKind.PRODUCER], dtype=np.int64),
        trades=trades,
        trader_kind=np.array([int(tr.kind) for tr in eng.traders], dtype=np.int8),
        wealth=np.array([tr.wealth for tr in eng.traders]),
        age=np.array([tr.age for tr in eng.traders], dtype=np.int64),
        switch_count=np.array([tr.switch_count for tr in eng.traders], dtype=np.int64),
        original=np.array([tr.original for tr in eng.traders], dtype=np.bool_),
        position=np.array([tr.position for tr in eng.traders], dtype=np.int8),
        open_time=np.array([tr.open_time for tr in eng.traders], dtype=np.int64),
        open_price=np.array([tr.open_price for tr in eng.traders]),
        final_rng_state=stream.state,
    )


def _run_numba(config: SimConfig, stream: Stream, draws, stop_when_survivors_leq: int) -> dict:
    from . import _kernel

    buy, sell, mg_table, prod_table, hist0 = draws
    out = _kernel.simulate(
        config.n_pair,
        config.n_mg,
        config.n_prod,
        config.s_per_trader,
        config.pattern_count,
        buy,
        sell,
        mg_table,
        prod_table,
        config.warmup + config.steps,
        config.impact_kind is ImpactKind.SQRT,
        hist0,
        config.history_source is HistorySource.EXCESS_DEMAND_SIGN,
        config.zero_bit_rule is ZeroBitRule.RANDOM_BIT,
        config.mg_score_mode is MgScoreMode.PER_STRATEGY,
        config.evolution_interval,
        np.uint64(stream.state),
        stop_when_survivors_leq,
    )
    stream.state = int(out["final_rng_state"])
    trades = np.zeros(len(out["tr_id"]), dtype=TRADE_DTYPE)
    trades["trader_id"] = out["tr_id"]
    trades["open_t"] = out["tr_open"]
    trades["close_t"] = out["tr_close"]
    trades["direction"] = out["tr_dir"]
    trades["open_price"] = out["tr_open_price"]
    trades["close_price"] = out["tr_close_price"]
    keep = dict(out)
    for k in ("tr_id", "tr_open", "tr_close", "tr_dir", "tr_open_price", "tr_close_price"):
        keep.pop(k)
    keep["trades"] = trades
    keep["final_rng_state"] = int(keep["final_rng_state"])
    return keep


def run(config: SimConfig, backend: str = "numba",
        stop_when_survivors_leq: int = 0) -> RunOutput:
    """Execute one run: warmup steps (retained in the series, excluded from
    the recorded views) followed by the recorded steps.

    ``stop_when_survivors_leq`` ends an evolution run early once the count of
    original traders reaches the threshold (0 disables); used by washout
    experiments.
    """
    config.validate()
    stream = Stream(config.seed)
    draws = initial_draws(config, stream)
    if backend == "numba":
        raw = _run_numba(config, stream, draws, stop_when_survivors_leq)
    elif backend == "python":
        raw = _run_python(config, stream, draws, stop_when_survivors_leq)
    else:
        raise ValueError(f"unknown backend: {backend!r}")
    return RunOutput(config=config, run_seed=config.seed, warmup=config.warmup, **raw)
