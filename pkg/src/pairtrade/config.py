"""Run configuration and validation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum


class ImpactKind(str, Enum):
    LINEAR = "linear"
    SQRT = "sqrt"


class HistorySource(str, Enum):
    """Which signal's sign feeds the history register each step."""

    EXCESS_DEMAND_SIGN = "excess-demand-sign"
    MID_RETURN_SIGN = "mid-return-sign"


class ZeroBitRule(str, Enum):
    """What bit to shift in when the history-source signal is exactly zero."""

    RANDOM_BIT = "random-bit"
    REUSE_LAST = "reuse-last"


class MgScoreMode(str, Enum):
    """MG strategy scoring: each strategy's own prescribed action, or the
    trader's realized action applied to all its strategies."""

    PER_STRATEGY = "per-strategy"
    REALIZED = "realized"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class SimConfig:
    """All parameters of one simulation run.

    Defaults follow the commonly reported setup: two strategies per trader,
    three-bit history, 500 warmup steps, linear impact, no evolution.
    """

    n_pair: int = 100          # pair-pattern traders
    n_mg: int = 0              # MG-strategy traders
    n_prod: int = 0            # producers (single fixed MG strategy)
    s_per_trader: int = 2      # strategies per (pair or MG) trader
    memory: int = 3            # history length in bits
    impact_kind: ImpactKind = ImpactKind.LINEAR
    steps: int = 100_000       # recorded steps
    warmup: int = 500          # discarded steps before recording
    evolution_interval: int = 0  # steps between eliminations; 0 disables
    seed: int = 0              # 64-bit master seed of the run stream
    history_source: HistorySource = HistorySource.MID_RETURN_SIGN
    zero_bit_rule: ZeroBitRule = ZeroBitRule.RANDOM_BIT
    mg_score_mode: MgScoreMode = MgScoreMode.PER_STRATEGY

    @property
    def pattern_count(self) -> int:
        return 1 << self.memory

    @property
    def n_total(self) -> int:
        return self.n_pair + self.n_mg + self.n_prod

    def validate(self) -> "SimConfig":
        """Raise ConfigError naming the first offending field."""
        if self.memory < 1:
            raise ConfigError("memory", "must be >= 1")
        if self.memory > 16:
            raise ConfigError("memory", "must be <= 16 (pattern table size)")
        p = self.pattern_count
        if self.s_per_trader < 1:
            raise ConfigError("s_per_trader", "must be >= 1")
        if self.s_per_trader > p * (p - 1):
            raise ConfigError(
                "s_per_trader",
                f"must be <= {p * (p - 1)} distinct ordered pairs for memory={self.memory}",
            )
        for name in ("n_pair", "n_mg", "n_prod"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.n_total < 1:
            raise ConfigError("n_pair", "population must contain at least one trader")
        if self.steps < 1:
            raise ConfigError("steps", "must be >= 1")
        if self.warmup < 0:
            raise ConfigError("warmup", "must be >= 0")
        if self.evolution_interval < 0:
            raise ConfigError("evolution_interval", "must be >= 0")
        if self.evolution_interval > 0 and (self.n_mg > 0 or self.n_prod > 0):
            # Elimination replaces the victim with a pair-pattern trader, so
            # evolution is only supported for pure pair populations.
            raise ConfigError(
                "evolution_interval", "evolution requires n_mg == n_prod == 0"
            )
        if not (0 <= self.seed < (1 << 64)):
            raise ConfigError("seed", "must fit in 64 bits")
        return self


CONFIG_FIELDS = tuple(f.name for f in fields(SimConfig))
