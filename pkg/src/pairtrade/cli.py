"""Command line runner: single runs, parameter sweeps, and washout timing.

Three subcommands share one configuration surface (flags, or a flat
``key value`` config file mirroring the flag names; flags override the file):

* ``run``    — one configuration, one or more seeds; writes per-run trade,
  wealth and sign-probability tables (and, on request, the full series).
* ``sweep``  — sweeps one integer parameter over a value list with
  ``--runs`` seeds per point; writes an aggregated summary CSV and fitted
  power-law exponents.
* ``washout`` — evolution runs timing how long the original population
  survives, over a population-size sweep and a list of washout fractions.

Every invocation writes ``manifest.txt``: the fully resolved configuration in
config-file syntax (plus the derived per-run seeds as comments), so feeding it
back through ``--config`` reproduces every output file byte-for-byte.
All CSV output uses 12 significant digits and LF line endings.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import analytics
from .config import (
    ConfigError,
    HistorySource,
    ImpactKind,
    MgScoreMode,
    SimConfig,
    ZeroBitRule,
)
from .engine import RunOutput, run
from .rng import derive_seed
from .traders import TraderKind

# ---------------------------------------------------------------------------
# configuration surface

# key -> (SimConfig field, converter); keys are the long flag spellings
_CONFIG_KEYS = {
    "impact": ("impact_kind", ImpactKind),
    "n-pair": ("n_pair", int),
    "n-mg": ("n_mg", int),
    "n-prod": ("n_prod", int),
    "s": ("s_per_trader", int),
    "m": ("memory", int),
    "steps": ("steps", int),
    "warmup": ("warmup", int),
    "seed": ("seed", int),
    "evolution-interval": ("evolution_interval", int),
    "history-source": ("history_source", HistorySource),
    "zero-bit-rule": ("zero_bit_rule", ZeroBitRule),
    "mg-score-mode": ("mg_score_mode", MgScoreMode),
}

_SWEEPABLE = {"n-pair", "n-mg", "n-prod", "s", "m", "evolution-interval"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# orchestration keys with (converter, default-per-command)
def _plan_keys(command: str) -> dict:
    keys = {
        "command": (str, command),
        "runs": (int, 1),
        "out": (str, "."),
        "dump-series": (_parse_bool, False),
        "workers": (int, 1),
        "sweep": (str, None),
    }
    if command == "washout":
        keys["ps"] = (str, "25,50,75")
        keys["max-steps"] = (int, 2_000_000)
    return keys


@dataclass(frozen=True)
class ExperimentPlan:
    command: str
    base: SimConfig
    sweep: tuple[str, tuple[int, ...]] | None  # (SimConfig field, values)
    runs_per_point: int
    out_dir: str
    dump_series: bool
    workers: int
    ps: tuple[float, ...] = ()       # washout fractions, e.g. (0.25, 0.5, 0.75)
    max_steps: int = 0               # washout step cap per run

    @property
    def points(self) -> tuple[int, ...]:
        if self.sweep is not None:
            return self.sweep[1]
        return (getattr(self.base, "n_pair"),)

    def config_for(self, point_index: int, run_index: int) -> SimConfig:
        cfg = self.base
        if self.sweep is not None:
            cfg = replace(cfg, **{self.sweep[0]: self.sweep[1][point_index]})
        return replace(cfg, seed=derive_seed(self.base.seed, point_index, run_index))


def _read_config_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = line.partition("=")
            else:
                key, _, value = line.partition(" ")
            key, value = key.strip(), value.strip()
            if not value:
                raise ConfigError(key, "missing value in config file")
            pairs[key] = value
    return pairs


def _parse_sweep(text: str) -> tuple[str, tuple[int, ...]]:
    name, eq, values = text.partition("=")
    name = name.strip()
    if not eq or name not in _SWEEPABLE:
        raise ConfigError(
            "sweep",
            f"expected VAR=V1,V2,... with VAR one of {sorted(_SWEEPABLE)}; got {text!r}",
        )
    try:
        vals = tuple(int(v) for v in values.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError("sweep", f"non-integer sweep value in {values!r}") from exc
    if not vals:
        raise ConfigError("sweep", "sweep value list is empty")
    return _CONFIG_KEYS[name][0], vals


def _parse_ps(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) / 100.0 for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError("ps", f"non-numeric washout percentage in {text!r}") from exc
    if not vals or any(not 0.0 <= p <= 1.0 for p in vals):
        raise ConfigError("ps", "washout percentages must lie in [0, 100]")
    return vals


def parse_config(command: str, flag_values: dict[str, str | None],
                 config_path: str | None) -> ExperimentPlan:
    """Resolve defaults <- config file <- explicit flags into a plan."""
    plan_keys = _plan_keys(command)
    resolved: dict[str, str] = {}
    if config_path:
        for key, value in _read_config_file(config_path).items():
            if key not in _CONFIG_KEYS and key not in plan_keys:
                raise ConfigError(key, "unknown configuration key")
            resolved[key] = value
    for key, value in flag_values.items():
        if value is not None:
            resolved[key] = value
    if resolved.get("command", command) != command:
        raise ConfigError("command", f"config file was written for "
                          f"{resolved['command']!r}, invoked as {command!r}")

    cfg_kwargs = {}
    for key, (field_name, conv) in _CONFIG_KEYS.items():
        if key in resolved:
            try:
                cfg_kwargs[field_name] = conv(resolved[key])
            except ValueError as exc:
                raise ConfigError(field_name, f"bad value {resolved[key]!r}") from exc
    if command == "washout":
        cfg_kwargs.setdefault("evolution_interval", 100)
        cfg_kwargs.setdefault("warmup", 0)
        cfg_kwargs.setdefault("impact_kind", ImpactKind.SQRT)
    base = SimConfig(**cfg_kwargs)

    def plan_value(key):
        conv, default = plan_keys[key]
        if key in resolved:
            try:
                return conv(resolved[key])
            except ValueError as exc:
                raise ConfigError(key, f"bad value {resolved[key]!r}") from exc
        return default

    sweep_text = plan_value("sweep")
    sweep = _parse_sweep(sweep_text) if sweep_text else None
    if command == "sweep" and sweep is None:
        raise ConfigError("sweep", "the sweep command requires --sweep VAR=V1,V2,...")
    runs = plan_value("runs")
    if runs < 1:
        raise ConfigError("runs", "must be >= 1")
    workers = plan_value("workers")
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    ps: tuple[float, ...] = ()
    max_steps = 0
    if command == "washout":
        ps = _parse_ps(plan_value("ps"))
        max_steps = plan_value("max-steps")
        if max_steps < 1:
            raise ConfigError("max-steps", "must be >= 1")
        if sweep is None:
            sweep = ("n_pair", (base.n_pair,))
        base = replace(base, steps=max_steps)
    plan = ExperimentPlan(
        command=command,
        base=base,
        sweep=sweep,
        runs_per_point=runs,
        out_dir=plan_value("out"),
        dump_series=plan_value("dump-series"),
        workers=workers,
        ps=ps,
        max_steps=max_steps,
    )
    plan.base.validate()
    return plan


# ---------------------------------------------------------------------------
# CSV helpers

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sample_se(values: np.ndarray):
    if values.size < 2:
        return None
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# per-run artifact writers

def write_series_csv(path, out: RunOutput) -> None:
    t = np.arange(out.warmup, out.steps_done)
    rows = zip(t, out.rec_price[1:], out.rec_returns, out.rec_excess_demand,
               out.rec_history)
    _write_csv(path, ["t", "price", "return", "excess_demand", "history"], rows)


def write_trades_csv(path, out: RunOutput) -> None:
    tr = out.trades
    rows = zip(tr["trader_id"], tr["open_t"], tr["close_t"], tr["direction"],
               tr["open_price"], tr["close_price"])
    _write_csv(
        path,
        ["trader_id", "open_t", "close_t", "direction", "open_price", "close_price"],
        rows,
    )


def write_wealth_csv(path, out: RunOutput) -> None:
    kinds = [TraderKind(k).name.lower() for k in out.trader_kind]
    rows = zip(range(out.wealth.size), kinds, out.wealth, out.age, out.switch_count)
    _write_csv(path, ["trader_id", "kind", "wealth", "age", "switch_count"], rows)


def write_puj_csv(path, out: RunOutput) -> None:
    tab = analytics.conditional_probability(out)
    rows = [
        (u, tab.probs[u, 0], tab.probs[u, 1], tab.probs[u, 2], tab.visits[u])
        for u in range(tab.probs.shape[0])
        if tab.visits[u] > 0
    ]
    _write_csv(path, ["u", "p_pos", "p_zero", "p_neg", "visits"], rows)


# ---------------------------------------------------------------------------
# execution

def _one_point_run(args):
    plan, i, j = args
    return i, j, run(plan.config_for(i, j))


def _iter_outputs(plan: ExperimentPlan, jobs, stop_map=None):
    """Yield (point_index, run_index, RunOutput) in deterministic job order."""
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            if stop_map:
                results = pool.map(_washout_job, [(plan, i, j, stop_map[i]) for i, j in jobs])
            else:
                results = pool.map(_one_point_run, [(plan, i, j) for i, j in jobs])
            yield from results
    else:
        for i, j in jobs:
            if stop_map:
                yield _washout_job((plan, i, j, stop_map[i]))
            else:
                yield i, j, run(plan.config_for(i, j))


def _washout_job(args):
    plan, i, j, stop = args
    out = run(plan.config_for(i, j), stop_when_survivors_leq=stop)
    # only the survivor series matters; drop the heavy arrays before returning
    return i, j, (out.survivors, out.config.n_total, out.steps_done)


def write_manifest(plan: ExperimentPlan, path) -> None:
    lines = [f"command = {plan.command}"]
    for key, (field_name, _conv) in _CONFIG_KEYS.items():
        value = getattr(plan.base, field_name)
        if isinstance(value, Enum):
            value = value.value
        lines.append(f"{key} = {value}")
    if plan.sweep is not None and plan.command != "run":
        flag_name = {v[0]: k for k, v in _CONFIG_KEYS.items()}[plan.sweep[0]]
        lines.append(f"sweep = {flag_name}={','.join(str(v) for v in plan.sweep[1])}")
    lines.append(f"runs = {plan.runs_per_point}")
    lines.append(f"dump-series = {'true' if plan.dump_series else 'false'}")
    lines.append(f"workers = {plan.workers}")
    if plan.command == "washout":
        lines.append(f"ps = {','.join(_fmt(p * 100) for p in plan.ps)}")
        lines.append(f"max-steps = {plan.max_steps}")
    # the output directory is an invocation detail, not part of the experiment
    for i in range(len(plan.points)):
        for j in range(plan.runs_per_point):
            seed = derive_seed(plan.base.seed, i, j)
            lines.append(f"# seed point={i} run={j} value={seed}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


SUMMARY_HEADER = [
    "sweep_value", "sigma2", "sigma2_se", "H", "H_se", "K", "K_se",
    "mean_wealth", "mean_wealth_se", "abs_sum_a_bias",
]

EXPONENT_HEADER = [
    "observable", "band_lo", "band_hi", "exponent", "intercept",
    "r_squared", "n_points",
]


def _summary_rows(plan: ExperimentPlan, stats_by_point) -> list[list]:
    rows = []
    for i, value in enumerate(plan.points):
        if not stats_by_point.get(i):
            continue
        arr = {k: np.array([s[k] for s in stats_by_point[i]]) for k in
               ("sigma2", "h", "k", "w", "bias")}
        rows.append([
            value,
            float(arr["sigma2"].mean()), _sample_se(arr["sigma2"]),
            float(arr["h"].mean()), _sample_se(arr["h"]),
            float(arr["k"].mean()), _sample_se(arr["k"]),
            float(arr["w"].mean()), _sample_se(arr["w"]),
            float(arr["bias"].mean()),
        ])
    return rows


def _exponent_rows(summary_rows, report) -> list[list]:
    x = np.array([row[0] for row in summary_rows], dtype=float)
    columns = {"sigma2": 1, "H": 3, "K": 5, "mean_wealth": 7}
    rows = []
    for name, col in columns.items():
        y = np.array([row[col] for row in summary_rows], dtype=float)
        for lo, hi in analytics.N_BANDS:
            in_band = (x >= lo) & (x <= hi)
            if np.count_nonzero(in_band) < 3:
                continue
            try:
                fit = analytics.fit_power_law(x, y, x_range=(lo, hi))
            except ValueError as exc:
                report(f"fit skipped for {name} on [{lo:g},{hi:g}]: {exc}")
                continue
            rows.append([name, lo, hi, fit.exponent, fit.intercept,
                         fit.r_squared, fit.n_points])
    return rows


def _run_stats(out: RunOutput) -> dict:
    s = analytics.summarize(out)
    return dict(sigma2=s.sigma2, h=s.h_value, k=s.k_value,
                w=s.mean_wealth, bias=s.abs_sum_a_bias)


def execute_plan(plan: ExperimentPlan, report=print) -> int:
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(plan, out_dir / "manifest.txt")
    if plan.command == "washout":
        return _execute_washout(plan, out_dir, report)

    impact = plan.base.impact_kind.value
    n_points = len(plan.points)
    jobs = [(i, j) for i in range(n_points) for j in range(plan.runs_per_point)]
    stats_by_point: dict[int, list] = {i: [] for i in range(n_points)}
    failures = 0
    for i, j, out in _iter_outputs(plan, jobs):
        try:
            stats_by_point[i].append(_run_stats(out))
        except Exception as exc:  # keep going, report the point
            failures += 1
            report(f"point {plan.points[i]} run {j} failed: {exc}")
            continue
        multi = plan.runs_per_point > 1 or n_points > 1
        suffix = f"_p{i}_r{j}" if multi else ""
        if plan.command == "run":
            write_trades_csv(out_dir / f"trades{suffix}.csv", out)
            write_wealth_csv(out_dir / f"wealth{suffix}.csv", out)
            write_puj_csv(out_dir / f"puj{suffix}.csv", out)
        if plan.dump_series:
            write_series_csv(out_dir / f"series{suffix}.csv", out)
        del out

    rows = _summary_rows(plan, {i: v for i, v in stats_by_point.items() if v})
    _write_csv(out_dir / f"summary_{impact}.csv", SUMMARY_HEADER, rows)
    if plan.sweep is not None and len(rows) >= 3:
        _write_csv(out_dir / f"exponents_{impact}.csv", EXPONENT_HEADER,
                   _exponent_rows(rows, report))
    report(f"wrote {plan.command} outputs to {out_dir}")
    return 1 if failures else 0


def _execute_washout(plan: ExperimentPlan, out_dir, report) -> int:
    max_ps = max(plan.ps)
    stop_map = {
        i: int(math.floor((1.0 - max_ps) * n)) for i, n in enumerate(plan.points)
    }
    jobs = [(i, j) for i in range(len(plan.points)) for j in range(plan.runs_per_point)]
    per_run_rows = []
    times: dict[tuple[float, int], list] = {}
    censored: dict[tuple[float, int], int] = {}
    for i, j, (survivors, n_total, _steps) in _iter_outputs(plan, jobs, stop_map):
        for ps in plan.ps:
            wt = analytics.washout_time(survivors, n_total, ps)
            per_run_rows.append([plan.points[i], ps * 100, j, wt.time, wt.censored])
            times.setdefault((ps, i), []).append(wt.time)
            censored[(ps, i)] = censored.get((ps, i), 0) + int(wt.censored)
    _write_csv(out_dir / "washout.csv",
               ["n_pair", "ps", "run", "time", "censored"], per_run_rows)

    summary_rows = []
    for ps in plan.ps:
        for i, n in enumerate(plan.points):
            arr = np.array(times[(ps, i)], dtype=float)
            summary_rows.append([ps * 100, n, float(arr.mean()),
                                 _sample_se(arr), censored[(ps, i)]])
    _write_csv(out_dir / "washout_summary.csv",
               ["ps", "n_pair", "mean_time", "se_time", "n_censored"], summary_rows)

    fit_rows = []
    for ps in plan.ps:
        x = np.array(plan.points, dtype=float)
        y = np.array([np.mean(times[(ps, i)]) for i in range(len(plan.points))])
        if x.size < 3:
            continue
        try:
            fit = analytics.fit_power_law(x, y)
        except ValueError as exc:
            report(f"fit skipped for ps={ps * 100:g}%: {exc}")
            continue
        fit_rows.append([ps * 100, fit.exponent, fit.intercept,
                         fit.r_squared, fit.n_points])
    if fit_rows:
        _write_csv(out_dir / "exponents_washout.csv",
                   ["ps", "exponent", "intercept", "r_squared", "n_points"], fit_rows)
    report(f"wrote washout outputs to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key-value config file; flags override it")
    p.add_argument("--impact", choices=[k.value for k in ImpactKind])
    p.add_argument("--n-pair", type=str)
    p.add_argument("--n-mg", type=str)
    p.add_argument("--n-prod", type=str)
    p.add_argument("--s", type=str, help="strategies per trader")
    p.add_argument("--m", type=str, help="history length in bits")
    p.add_argument("--steps", type=str)
    p.add_argument("--warmup", type=str)
    p.add_argument("--seed", type=str, help="master seed; per-run seeds derive from it")
    p.add_argument("--evolution-interval", type=str)
    p.add_argument("--history-source", choices=[k.value for k in HistorySource])
    p.add_argument("--zero-bit-rule", choices=[k.value for k in ZeroBitRule])
    p.add_argument("--mg-score-mode", choices=[k.value for k in MgScoreMode])
    p.add_argument("--runs", type=str, help="seeds per sweep point")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--dump-series", action="store_const", const="true")
    p.add_argument("--workers", type=str)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairtrade",
        description="Seeded market simulations with pair-pattern trading strategies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_sweep = sub.add_parser("sweep", help="sweep one parameter over a value list")
    p_wash = sub.add_parser("washout", help="time the washout of original traders")
    for p in (p_run, p_sweep, p_wash):
        _add_common_flags(p)
    p_sweep.add_argument("--sweep", type=str, help="VAR=V1,V2,... e.g. n-pair=100,200")
    p_wash.add_argument("--sweep", type=str, help="VAR=V1,V2,... e.g. n-pair=50,100")
    p_wash.add_argument("--ps", type=str, help="washout percentages, e.g. 25,50,75")
    p_wash.add_argument("--max-steps", type=str, help="step cap per washout run")
    return parser


def plan_from_argv(argv) -> ExperimentPlan:
    args = build_parser().parse_args(argv)
    flag_values = {
        key: getattr(args, key.replace("-", "_"), None)
        for key in list(_CONFIG_KEYS) + list(_plan_keys(args.command))
        if key != "command"
    }
    return parse_config(args.command, flag_values, args.config)


def main(argv=None) -> int:
    try:
        plan = plan_from_argv(sys.argv[1:] if argv is None else argv)
        return execute_plan(plan)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
