"""Observables, power-law fitting, accounting oracle, and diagnostics.

All functions are pure over an immutable RunOutput.  Statistics use the
recorded (post-warmup) series; the wealth-sum accounting oracle integrates
the full series from game start, because wealth does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import HistorySource, ImpactKind, ZeroBitRule
from .engine import RunOutput
from .traders import TraderKind


# ---------------------------------------------------------------------------
# conditional probabilities and demand bias

@dataclass
class PujTable:
    """p(u, j): probability of return sign j immediately after history u.

    ``probs`` columns are (positive, zero, negative); rows of unvisited
    histories are NaN, not zero-filled.
    """

    probs: np.ndarray   # (P, 3)
    visits: np.ndarray  # (P,)

    @property
    def visited(self) -> np.ndarray:
        return self.visits > 0

    def flatness_gap(self) -> float:
        """max_u |p(u,+1) - p(u,-1)| over visited histories."""
        d = np.abs(self.probs[self.visited, 0] - self.probs[self.visited, 2])
        return float(d.max()) if d.size else 0.0


def conditional_probability(run: RunOutput) -> PujTable:
    p = run.config.pattern_count
    hist = run.rec_history
    ret = run.rec_returns
    col = np.where(ret > 0, 0, np.where(ret < 0, 2, 1))
    counts = np.bincount(hist * 3 + col, minlength=3 * p).reshape(p, 3).astype(float)
    visits = counts.sum(axis=1)
    probs = np.full((p, 3), np.nan)
    vis = visits > 0
    probs[vis] = counts[vis] / visits[vis, None]
    return PujTable(probs=probs, visits=visits.astype(np.int64))


@dataclass
class DemandBias:
    a_given_u: np.ndarray  # (P,), NaN where unvisited
    visits: np.ndarray
    abs_sum: float


def excess_demand_bias(run: RunOutput) -> DemandBias:
    p = run.config.pattern_count
    hist = run.rec_history
    a = run.rec_excess_demand
    visits = np.bincount(hist, minlength=p)
    sums = np.bincount(hist, weights=a.astype(float), minlength=p)
    mean = np.full(p, np.nan)
    vis = visits > 0
    mean[vis] = sums[vis] / visits[vis]
    return DemandBias(mean, visits, float(abs(np.nansum(np.where(vis, mean, 0.0)))))


# ---------------------------------------------------------------------------
# fluctuation / predictability measures

def variance_sigma2(returns: np.ndarray, p_count: int) -> float:
    """Population variance of the returns divided by the pattern count."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    return float((np.mean(r * r) - np.mean(r) ** 2) / p_count)


def impact_H(run: RunOutput) -> float:
    """Sum over histories of the squared conditional mean return, over P.

    Unvisited histories contribute zero (uniform weighting over states)."""
    p = run.config.pattern_count
    hist = run.rec_history
    ret = run.rec_returns
    visits = np.bincount(hist, minlength=p)
    sums = np.bincount(hist, weights=ret, minlength=p)
    vis = visits > 0
    means = np.zeros(p)
    means[vis] = sums[vis] / visits[vis]
    return float(np.sum(means * means) / p)


@njit(cache=True)
def _pair_drift_sq_sum(hist, price, p_count):
    # Non-overlapping episode scan per ordered pattern pair: at an occurrence
    # of mu, the next occurrence of nu closes the episode with per-step drift
    # (price[t_nu+1] - price[t_mu+1]) / (t_nu - t_mu); scanning resumes after
    # the matched nu.
    total = 0.0
    for mu in range(p_count):
        for nu in range(p_count):
            if nu == mu:
                continue
            waiting_close = False
            tm = -1
            s = 0.0
            c = 0
            for t in range(hist.size):
                h = hist[t]
                if not waiting_close:
                    if h == mu:
                        tm = t
                        waiting_close = True
                elif h == nu:
                    s += (price[t + 1] - price[tm + 1]) / (t - tm)
                    c += 1
                    waiting_close = False
            if c > 0:
                m = s / c
                total += m * m
    return total


def predictability_K(run: RunOutput) -> float:
    """Mean-squared per-step drift between ordered pattern occurrences."""
    p = run.config.pattern_count
    hist = np.ascontiguousarray(run.rec_history)
    price = np.ascontiguousarray(run.rec_price)
    return float(_pair_drift_sq_sum(hist, price, p) / (p * (p - 1)))


# ---------------------------------------------------------------------------
# wealth

@dataclass
class WealthStats:
    mean_wealth: float
    # columns (switch_count, wealth), sorted most-switching first
    by_switch_rank: np.ndarray
    # columns (age, wealth), sorted oldest first
    by_age_rank: np.ndarray
    # wealth sorted descending, as (W - mean)/mean, or absolute deviations
    # when the mean is zero (see ``relative_flagged``)
    relative_by_wealth_rank: np.ndarray
    relative_flagged: bool


def wealth_stats(run: RunOutput) -> WealthStats:
    w = run.wealth
    mean = float(np.sum(w) / w.size)
    by_switch = np.argsort(-run.switch_count, kind="stable")
    by_age = np.argsort(-run.age, kind="stable")
    by_wealth = np.argsort(-w, kind="stable")
    if mean == 0.0:
        rel = w[by_wealth] - mean
        flagged = True
    else:
        rel = (w[by_wealth] - mean) / mean
        flagged = False
    return WealthStats(
        mean_wealth=mean,
        by_switch_rank=np.column_stack([run.switch_count[by_switch], w[by_switch]]),
        by_age_rank=np.column_stack([run.age[by_age], w[by_age]]),
        relative_by_wealth_rank=rel,
        relative_flagged=flagged,
    )


def mean_wealth_by_kind(run: RunOutput) -> dict[TraderKind, float]:
    out = {}
    for kind in TraderKind:
        mask = run.trader_kind == int(kind)
        if mask.any():
            out[kind] = float(run.wealth[mask].mean())
    return out


@dataclass
class WealthSumOracle:
    total: float
    open_positions: int  # positions open at evaluation, excluded from the sum


def wealth_sum_oracle_linear(run: RunOutput) -> WealthSumOracle:
    """Evaluate the traders' wealth sum directly from the logged excess
    demand and the trade ledger, for linear impact.

    Per closed round trip: direction * (A(t1)/2 + A(t2)/2 + sum of A strictly
    between), which telescopes to the mid-price difference the engine credits.
    Open positions carry no realized wealth and are excluded (reported)."""
    if run.config.impact_kind is not ImpactKind.LINEAR:
        raise ValueError("oracle is defined for linear impact only")
    a = run.excess_demand.astype(float)
    cs = np.concatenate([[0.0], np.cumsum(a)])  # cs[k] = sum of a[:k]
    tr = run.trades
    t1 = tr["open_t"]
    t2 = tr["close_t"]
    d = tr["direction"].astype(float)
    inner = cs[t2] - cs[t1 + 1]
    total = float(np.sum(d * (0.5 * a[t1] + 0.5 * a[t2] + inner)))
    return WealthSumOracle(total, int(np.count_nonzero(run.position)))


# ---------------------------------------------------------------------------
# power-law fitting

@dataclass
class PowerLawFit:
    exponent: float
    intercept: float  # log10 of the prefactor
    r_squared: float
    n_points: int


def fit_power_law(x, y, x_range: tuple[float, float] | None = None) -> PowerLawFit:
    """Ordinary least squares on (log10 x, log10 y) inside the x range."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_range is not None:
        lo, hi = x_range
        mask = (x >= lo) & (x <= hi)
        x, y = x[mask], y[mask]
    if x.size < 3:
        raise ValueError(f"need at least 3 points in range, got {x.size}")
    bad = (x <= 0) | (y <= 0)
    if bad.any():
        raise ValueError(
            f"nonpositive values at x={x[bad].tolist()}, y={y[bad].tolist()}; "
            "cannot fit a power law"
        )
    lx, ly = np.log10(x), np.log10(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(float(slope), float(intercept), r2, int(x.size))


# default fit bands for population-size sweeps
N_BANDS = ((10.0, 100.0 - 1e-9), (100.0, 1000.0 - 1e-9))


# ---------------------------------------------------------------------------
# distributions and evolution diagnostics

def return_histogram(returns: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized histogram over symmetric bins; returns (edges, mass)."""
    r = np.asarray(returns, dtype=float)
    m = float(np.abs(r).max()) if r.size else 0.0
    if m == 0.0:
        return np.array([0.0, 0.0]), np.array([1.0])
    counts, edges = np.histogram(r, bins=bins, range=(-m, m))
    return edges, counts / counts.sum()


@dataclass
class WashoutTime:
    time: int       # step count, 1-based; 0 at the P_s=0 boundary
    censored: bool  # threshold never reached before the series ended


def washout_time(survivors: np.ndarray, n_original: int, ps: float) -> WashoutTime:
    """First time at which a fraction ps of the original traders is gone."""
    if not 0.0 <= ps <= 1.0:
        raise ValueError("ps must be in [0, 1]")
    threshold = (1.0 - ps) * n_original
    if n_original <= threshold:
        return WashoutTime(0, False)
    hits = np.flatnonzero(survivors <= threshold)
    if hits.size == 0:
        return WashoutTime(int(survivors.size), True)
    return WashoutTime(int(hits[0]) + 1, False)


def detect_periodic_lock(history: np.ndarray, window: int) -> tuple[int, int] | None:
    """Smallest period <= window/2 making the trailing window exactly
    periodic, with the onset index of the periodic tail; None if aperiodic."""
    h = np.asarray(history)
    if window > h.size:
        raise ValueError("window exceeds series length")
    tail = h[h.size - window :]
    for period in range(1, window // 2 + 1):
        if np.array_equal(tail[period:], tail[:-period]):
            onset = h.size - window
            while onset > 0 and h[onset - 1] == h[onset - 1 + period]:
                onset -= 1
            return period, onset
    return None


# ---------------------------------------------------------------------------
# consistency checks

def recompute_wealth_from_ledger(run: RunOutput) -> np.ndarray:
    """Per-trader wealth summed from the trade ledger (pair traders only)."""
    w = np.zeros(run.wealth.size)
    tr = run.trades
    np.add.at(
        w,
        tr["trader_id"],
        tr["direction"].astype(float) * (tr["close_price"] - tr["open_price"]),
    )
    return w


def verify_history_replay(run: RunOutput) -> bool:
    """Replay the history register from the logged series.

    Checks the structural shift and, wherever the source signal is nonzero,
    the inserted bit; zero-signal bits are checked under REUSE_LAST and
    accepted as-logged under RANDOM_BIT (those bits came from the stream)."""
    cfg = run.config
    p = cfg.pattern_count
    hist = run.history
    src = (
        run.excess_demand.astype(float)
        if cfg.history_source is HistorySource.EXCESS_DEMAND_SIGN
        else run.returns
    )
    last_bit = int(hist[0]) & 1  # engines seed the reuse bit this way
    for t in range(run.steps_done - 1):
        nxt = int(hist[t + 1])
        bit = nxt & 1
        if nxt != ((int(hist[t]) << 1) | bit) % p:
            return False
        if src[t] > 0 and bit != 1:
            return False
        if src[t] < 0 and bit != 0:
            return False
        if src[t] == 0 and cfg.zero_bit_rule is ZeroBitRule.REUSE_LAST:
            if t > 0 and bit != last_bit:
                return False
        last_bit = bit
    return True


# ---------------------------------------------------------------------------
# summary

@dataclass
class ObservableSummary:
    sigma2: float
    h_value: float
    k_value: float
    mean_wealth: float
    abs_sum_a_bias: float
    p_uj: PujTable
    a_given_u: DemandBias


def summarize(run: RunOutput) -> ObservableSummary:
    bias = excess_demand_bias(run)
    return ObservableSummary(
        sigma2=variance_sigma2(run.rec_returns, run.config.pattern_count),
        h_value=impact_H(run),
        k_value=predictability_K(run),
        mean_wealth=float(np.sum(run.wealth) / run.wealth.size),
        abs_sum_a_bias=bias.abs_sum,
        p_uj=conditional_probability(run),
        a_given_u=bias,
    )
