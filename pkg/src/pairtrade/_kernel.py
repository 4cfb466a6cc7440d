"""Compiled hot loop.

Same per-step protocol as ``engine.ReferenceEngine`` (see that module's
docstring for the step order), operating on flat arrays under numba.  RNG is
the identical SplitMix64 stream, consumed in the identical order, so outputs
are bit-for-bit equal to the reference backend.

Trader indexing is global: pair traders first, then MG traders, then
producers.  ``wealth``/``age``/``position``/``open_*`` arrays span all
traders; strategy tables are per kind.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(cache=True, inline="always")
def _rng_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return state, z


@njit(cache=True, inline="always")
def _signed_sqrt(a):
    if a > 0:
        return math.sqrt(a)
    if a < 0:
        return -math.sqrt(-a)
    return 0.0


@njit(cache=True)
def _simulate_jit(
    n_pair, n_mg, n_prod, s_per, p_count,
    buy, sell, mg_table, prod_table,
    total_steps, sqrt_impact, hist0,
    source_is_a, zero_random, mg_per_strategy,
    evo_interval, rng_state, stop_survivors_leq,
):
    n_total = n_pair + n_mg + n_prod
    pair_space = p_count * (p_count - 1)

    # pair-trader strategy state
    score = np.zeros((n_pair, s_per), dtype=np.float64)
    pend = np.zeros((n_pair, s_per), dtype=np.int8)
    pend_price = np.zeros((n_pair, s_per), dtype=np.float64)
    open_strat = np.full(n_pair, -1, dtype=np.int64)
    # MG strategy state
    mg_score = np.zeros((n_mg, s_per), dtype=np.float64)

    # unified per-trader state (pair, then MG, then producers)
    position = np.zeros(n_total, dtype=np.int8)
    open_price = np.zeros(n_total, dtype=np.float64)
    open_time = np.full(n_total, -1, dtype=np.int64)
    wealth = np.zeros(n_total, dtype=np.float64)
    age = np.zeros(n_total, dtype=np.int64)
    switch = np.zeros(n_total, dtype=np.int64)
    last_sel = np.full(n_total, -1, dtype=np.int64)
    original = np.ones(n_total, dtype=np.bool_)
    act_all = np.zeros(n_total, dtype=np.int64)

    # per-step logs
    price_ser = np.zeros(total_steps + 1, dtype=np.float64)
    r_ser = np.zeros(total_steps, dtype=np.float64)
    a_ser = np.zeros(total_steps, dtype=np.int64)
    hist_ser = np.zeros(total_steps, dtype=np.int64)
    surv_ser = np.zeros(total_steps, dtype=np.int64)
    actp_ser = np.zeros(total_steps, dtype=np.int64)
    actm_ser = np.zeros(total_steps, dtype=np.int64)
    actpr_ser = np.zeros(total_steps, dtype=np.int64)

    # trade ledger, grown by doubling
    cap = 1024
    tr_id = np.zeros(cap, dtype=np.int64)
    tr_open = np.zeros(cap, dtype=np.int64)
    tr_close = np.zeros(cap, dtype=np.int64)
    tr_dir = np.zeros(cap, dtype=np.int8)
    tr_op = np.zeros(cap, dtype=np.float64)
    tr_cp = np.zeros(cap, dtype=np.float64)
    ntr = 0

    tied = np.zeros(max(s_per, max(n_pair, 1)), dtype=np.int64)

    hist = hist0
    last_bit = hist0 & 1
    price = 0.0
    a_prev = 0
    surv_count = n_total
    steps_done = 0

    for t in range(total_steps):
        u = hist
        a_total = 0
        n_active_pair = 0
        # pair trader decisions
        for i in range(n_pair):
            pos = position[i]
            if pos == 0:
                best = score[i, 0]
                for s in range(1, s_per):
                    if score[i, s] > best:
                        best = score[i, s]
                cnt = 0
                for s in range(s_per):
                    if score[i, s] == best:
                        tied[cnt] = s
                        cnt += 1
                if cnt > 1:
                    rng_state, z = _rng_next(rng_state)
                    sel = tied[z % np.uint64(cnt)]
                else:
                    sel = tied[0]
                if last_sel[i] >= 0 and sel != last_sel[i]:
                    switch[i] += 1
                last_sel[i] = sel
                if u == buy[i, sel]:
                    act = 1
                elif u == sell[i, sel]:
                    act = -1
                else:
                    act = 0
            else:
                os_ = open_strat[i]
                comp = sell[i, os_] if pos > 0 else buy[i, os_]
                act = -pos if u == comp else 0
            act_all[i] = act
            a_total += act
            if act != 0:
                n_active_pair += 1
        # MG trader decisions
        for i in range(n_mg):
            g = n_pair + i
            best = mg_score[i, 0]
            for s in range(1, s_per):
                if mg_score[i, s] > best:
                    best = mg_score[i, s]
            cnt = 0
            for s in range(s_per):
                if mg_score[i, s] == best:
                    tied[cnt] = s
                    cnt += 1
            if cnt > 1:
                rng_state, z = _rng_next(rng_state)
                sel = tied[z % np.uint64(cnt)]
            else:
                sel = tied[0]
            if last_sel[g] >= 0 and sel != last_sel[g]:
                switch[g] += 1
            last_sel[g] = sel
            act = mg_table[i, sel, u]
            act_all[g] = act
            a_total += act
        # producer decisions
        for i in range(n_prod):
            g = n_pair + n_mg + i
            act = prod_table[i, u]
            act_all[g] = act
            a_total += act

        if sqrt_impact:
            r = 0.5 * (_signed_sqrt(a_total) + _signed_sqrt(a_prev))
        else:
            r = 0.5 * (a_total + a_prev)
        p_next = price + r

        # position transitions: pair traders close to flat, table traders
        # flip (a sign change closes the round trip and reopens)
        for g in range(n_total):
            act = act_all[g]
            if act == 0:
                continue
            pos = position[g]
            if pos == 0:
                position[g] = act
                if g < n_pair:
                    open_strat[g] = last_sel[g]
                open_price[g] = p_next
                open_time[g] = t
            elif g < n_pair or act == -pos:
                d = pos
                wealth[g] += d * (p_next - open_price[g])
                if ntr == cap:
                    cap *= 2
                    nid = np.zeros(cap, dtype=np.int64)
                    nop = np.zeros(cap, dtype=np.int64)
                    ncl = np.zeros(cap, dtype=np.int64)
                    ndr = np.zeros(cap, dtype=np.int8)
                    npr = np.zeros(cap, dtype=np.float64)
                    ncp = np.zeros(cap, dtype=np.float64)
                    nid[:ntr] = tr_id[:ntr]
                    nop[:ntr] = tr_open[:ntr]
                    ncl[:ntr] = tr_close[:ntr]
                    ndr[:ntr] = tr_dir[:ntr]
                    npr[:ntr] = tr_op[:ntr]
                    ncp[:ntr] = tr_cp[:ntr]
                    tr_id, tr_open, tr_close = nid, nop, ncl
                    tr_dir, tr_op, tr_cp = ndr, npr, ncp
                tr_id[ntr] = g
                tr_open[ntr] = open_time[g]
                tr_close[ntr] = t
                tr_dir[ntr] = d
                tr_op[ntr] = open_price[g]
                tr_cp[ntr] = p_next
                ntr += 1
                if g < n_pair:
                    position[g] = 0
                    open_strat[g] = -1
                    open_time[g] = -1
                else:
                    position[g] = act
                    open_price[g] = p_next
                    open_time[g] = t

        # pair virtual scores
        for i in range(n_pair):
            for s in range(s_per):
                bp = buy[i, s]
                sp = sell[i, s]
                if u == bp:
                    code = 1
                elif u == sp:
                    code = 2
                else:
                    continue
                pd = pend[i, s]
                if pd == 0 or pd == code:
                    pend[i, s] = code
                    pend_price[i, s] = p_next
                else:
                    if code == 2:
                        score[i, s] += p_next - pend_price[i, s]
                    else:
                        score[i, s] += pend_price[i, s] - p_next
                    pend[i, s] = 0

        # MG scores
        for i in range(n_mg):
            if mg_per_strategy:
                for s in range(s_per):
                    mg_score[i, s] -= mg_table[i, s, u] * r
            else:
                for s in range(s_per):
                    mg_score[i, s] -= act_all[n_pair + i] * r

        # logs
        a_ser[t] = a_total
        r_ser[t] = r
        price_ser[t + 1] = p_next
        hist_ser[t] = u
        actp_ser[t] = n_active_pair
        actm_ser[t] = n_mg
        actpr_ser[t] = n_prod

        # history register
        sig = float(a_total) if source_is_a else r
        if sig > 0:
            bit = 1
        elif sig < 0:
            bit = 0
        elif zero_random:
            rng_state, z = _rng_next(rng_state)
            bit = np.int64(z % np.uint64(2))
        else:
            bit = last_bit
        last_bit = bit
        hist = ((hist << 1) | bit) & (p_count - 1)

        # ages
        for g in range(n_total):
            age[g] += 1

        price = p_next
        a_prev = a_total

        # evolution (pure pair populations only; enforced by config)
        if evo_interval > 0 and (t + 1) % evo_interval == 0:
            total_w = 0.0
            for i in range(n_pair):
                total_w += wealth[i]
            mean_w = total_w / n_pair
            min_w = wealth[0]
            for i in range(1, n_pair):
                if wealth[i] < min_w:
                    min_w = wealth[i]
            cnt = 0
            for i in range(n_pair):
                if wealth[i] == min_w:
                    tied[cnt] = i
                    cnt += 1
            if cnt > 1:
                rng_state, z = _rng_next(rng_state)
                victim = tied[z % np.uint64(cnt)]
            else:
                victim = tied[0]
            if original[victim]:
                original[victim] = False
                surv_count -= 1
            for s in range(s_per):
                while True:
                    rng_state, z = _rng_next(rng_state)
                    k = np.int64(z % np.uint64(pair_space))
                    mu = k // (p_count - 1)
                    j = k % (p_count - 1)
                    nu = j + 1 if j >= mu else j
                    dup = False
                    for s2 in range(s):
                        if buy[victim, s2] == mu and sell[victim, s2] == nu:
                            dup = True
                            break
                    if not dup:
                        break
                buy[victim, s] = mu
                sell[victim, s] = nu
                score[victim, s] = 0.0
                pend[victim, s] = 0
                pend_price[victim, s] = 0.0
            position[victim] = 0
            open_strat[victim] = -1
            open_price[victim] = 0.0
            open_time[victim] = -1
            wealth[victim] = mean_w
            age[victim] = 0
            switch[victim] = 0
            last_sel[victim] = -1

        surv_ser[t] = surv_count
        steps_done = t + 1
        if stop_survivors_leq > 0 and surv_count <= stop_survivors_leq:
            break

    return (
        price_ser[: steps_done + 1],
        r_ser[:steps_done],
        a_ser[:steps_done],
        hist_ser[:steps_done],
        surv_ser[:steps_done],
        actp_ser[:steps_done],
        actm_ser[:steps_done],
        actpr_ser[:steps_done],
        tr_id[:ntr].copy(),
        tr_open[:ntr].copy(),
        tr_close[:ntr].copy(),
        tr_dir[:ntr].copy(),
        tr_op[:ntr].copy(),
        tr_cp[:ntr].copy(),
        wealth, age, switch, original, position, open_time, open_price,
        steps_done, rng_state,
    )


def simulate(
    n_pair, n_mg, n_prod, s_per, p_count,
    buy, sell, mg_table, prod_table,
    total_steps, sqrt_impact, hist0,
    source_is_a, zero_random, mg_per_strategy,
    evo_interval, rng_state, stop_survivors_leq,
):
    """Run the jitted loop and repackage its tuple as named outputs matching
    the reference backend's layout."""
    (
        price_ser, r_ser, a_ser, hist_ser, surv_ser, actp, actm, actpr,
        tr_id, tr_open, tr_close, tr_dir, tr_op, tr_cp,
        wealth, age, switch, original, position, open_time, open_price,
        steps_done, final_rng_state,
    ) = _simulate_jit(
        n_pair, n_mg, n_prod, s_per, p_count,
        buy.copy(), sell.copy(), mg_table, prod_table,
        total_steps, sqrt_impact, hist0,
        source_is_a, zero_random, mg_per_strategy,
        evo_interval, rng_state, stop_survivors_leq,
    )
    kind = np.concatenate([
        np.zeros(n_pair, dtype=np.int8),
        np.ones(n_mg, dtype=np.int8),
        np.full(n_prod, 2, dtype=np.int8),
    ])
    # producers have no strategy choice, so no switches to count
    switch[n_pair + n_mg:] = 0
    return dict(
        steps_done=int(steps_done),
        price=price_ser,
        returns=r_ser,
        excess_demand=a_ser,
        history=hist_ser,
        survivors=surv_ser,
        active_pair=actp,
        active_mg=actm,
        active_prod=actpr,
        tr_id=tr_id,
        tr_open=tr_open,
        tr_close=tr_close,
        tr_dir=tr_dir,
        tr_open_price=tr_op,
        tr_close_price=tr_cp,
        trader_kind=kind,
        wealth=wealth,
        age=age,
        switch_count=switch,
        original=original,
        position=position,
        open_time=open_time,
        open_price=open_price,
        final_rng_state=final_rng_state,
    )
