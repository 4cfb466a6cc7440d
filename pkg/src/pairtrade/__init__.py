"""Agent-based market simulator with pair-pattern trading strategies."""

from .config import (
    ConfigError,
    HistorySource,
    ImpactKind,
    MgScoreMode,
    SimConfig,
    ZeroBitRule,
)
from .engine import RunOutput, TradeRecord, run

__all__ = [
    "ConfigError",
    "HistorySource",
    "ImpactKind",
    "MgScoreMode",
    "RunOutput",
    "SimConfig",
    "TradeRecord",
    "ZeroBitRule",
    "run",
]
