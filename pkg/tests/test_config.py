import dataclasses

import pytest

from pairtrade.config import (
    ConfigError,
    HistorySource,
    ImpactKind,
    MgScoreMode,
    SimConfig,
    ZeroBitRule,
)


def test_defaults():
    cfg = SimConfig()
    assert cfg.n_pair == 100 and cfg.s_per_trader == 2 and cfg.memory == 3
    assert cfg.warmup == 500 and cfg.evolution_interval == 0
    assert cfg.impact_kind is ImpactKind.LINEAR
    assert cfg.history_source is HistorySource.MID_RETURN_SIGN
    assert cfg.zero_bit_rule is ZeroBitRule.RANDOM_BIT
    assert cfg.mg_score_mode is MgScoreMode.PER_STRATEGY
    cfg.validate()


def test_derived_counts():
    cfg = SimConfig(memory=3, n_pair=10, n_mg=4, n_prod=2)
    assert cfg.pattern_count == 8
    assert cfg.n_total == 16


def test_config_is_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        SimConfig().steps = 5  # type: ignore[misc]


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(steps=0), "steps"),
        (dict(memory=0), "memory"),
        (dict(memory=17), "memory"),
        (dict(s_per_trader=0), "s_per_trader"),
        (dict(memory=1, s_per_trader=3), "s_per_trader"),
        (dict(n_pair=-1), "n_pair"),
        (dict(n_mg=-2), "n_mg"),
        (dict(n_pair=0), "n_pair"),
        (dict(warmup=-1), "warmup"),
        (dict(evolution_interval=-5), "evolution_interval"),
        (dict(evolution_interval=100, n_mg=3), "evolution_interval"),
        (dict(evolution_interval=100, n_prod=3), "evolution_interval"),
        (dict(seed=-1), "seed"),
        (dict(seed=1 << 64), "seed"),
    ],
)
def test_validation_names_the_offending_field(kwargs, field):
    with pytest.raises(ConfigError) as exc:
        SimConfig(**kwargs).validate()
    assert exc.value.field == field
    assert field in str(exc.value)


def test_enum_values_are_cli_spellings():
    assert ImpactKind.SQRT.value == "sqrt"
    assert HistorySource.MID_RETURN_SIGN.value == "mid-return-sign"
    assert ZeroBitRule.REUSE_LAST.value == "reuse-last"
    assert MgScoreMode.REALIZED.value == "realized"
