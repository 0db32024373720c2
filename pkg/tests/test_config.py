"""YAML experiment configs: parsing, presets, round trips."""

import numpy as np
import pytest

from covdl import (
    AnalysisSettings,
    DictLearnSettings,
    EvalSettings,
    ExperimentConfig,
    OptimizerSettings,
    load_config,
    parse_config,
    preset,
    serialize_config,
)
from covdl.config import PRESET_NAMES
from covdl.errors import ConfigError
from covdl.simgen import ScenarioConfig

MINIMAL = """
scenario:
  n_channels: 4
  n_sources: 6
  k_active: 2
  duration_seconds: 60.0
  sample_rate: 50.0
  segment_seconds: 2.0
seed: 7
"""


def test_parse_minimal_scenario_config():
    cfg = parse_config(MINIMAL)
    assert cfg.scenario.n_channels == 4
    assert cfg.scenario.seed == 7
    assert cfg.seed == 7
    assert cfg.n_sources == 6
    assert cfg.sparsity_k() == 2
    assert cfg.analysis.segment_seconds == 2.0
    assert cfg.analysis.overlap == 0.5
    assert cfg.eval.threshold == 0.99
    assert cfg.output_dir == "out"


def test_default_analysis_settings():
    a = AnalysisSettings()
    assert (a.segment_seconds, a.overlap, a.center, a.weighted) == (2.0, 0.5, False, False)
    assert a.mode is None and a.n_sources is None
    assert a.dictlearn == DictLearnSettings()
    assert a.optimizer == OptimizerSettings()


def test_roundtrip_equality():
    cfg = parse_config(MINIMAL)
    assert parse_config(serialize_config(cfg)) == cfg


def test_roundtrip_preserves_every_preset():
    for name in PRESET_NAMES:
        cfg = preset(name, seed=3)
        assert parse_config(serialize_config(cfg)) == cfg


def test_roundtrip_external_data_config():
    cfg = parse_config(
        "data_path: rec.csv\ndata_sample_rate: 128.0\n"
        "analysis:\n  n_sources: 10\n  dictlearn:\n    sparsity_k: 3\n"
    )
    assert cfg.scenario is None
    assert cfg.n_sources == 10
    assert cfg.sparsity_k() == 3
    assert parse_config(serialize_config(cfg)) == cfg


def test_presets_cover_three_regimes():
    assert PRESET_NAMES == ("scenario1", "scenario2", "scenario3")
    s1 = preset("scenario1").scenario
    s2 = preset("scenario2").scenario
    s3 = preset("scenario3").scenario
    assert (s1.n_channels, s1.n_sources, s1.k_active) == (32, 32, 32)
    assert (s2.n_channels, s2.n_sources, s2.k_active) == (32, 64, 64)
    assert (s3.n_channels, s3.n_sources, s3.k_active) == (8, 40, 10)
    for sc in (s1, s2, s3):
        assert sc.duration_seconds == 3960.0
        assert sc.sample_rate == 100.0
        assert sc.segment_seconds == 2.0
        assert sc.power_range == (1.0, 2.0)


def test_preset_analysis_choices():
    cfg = preset("scenario1", seed=5)
    assert cfg.seed == 5 and cfg.scenario.seed == 5
    assert cfg.analysis.overlap == 0.0
    assert cfg.analysis.weighted is True
    # the overcomplete preset swaps in a more aggressive learner
    dl3 = preset("scenario3").analysis.dictlearn
    assert dl3.update_rule == "ksvd"
    assert dl3.sparsity_k == 8
    assert dl3.restarts == 4
    assert preset("scenario2").analysis.dictlearn == DictLearnSettings()


def test_preset_key_in_yaml_expands():
    cfg = parse_config("preset: scenario3\nseed: 2\n")
    assert cfg == preset("scenario3", seed=2)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        parse_config("preset: scenario9\n")


def test_unknown_keys_rejected_at_every_level():
    with pytest.raises(ConfigError, match="top-level"):
        parse_config(MINIMAL + "bogus: 1\n")
    with pytest.raises(ConfigError, match="scenario"):
        parse_config(MINIMAL.replace("seed: 7", "  bogus: 1\nseed: 7"))
    with pytest.raises(ConfigError, match="analysis"):
        parse_config(MINIMAL + "analysis:\n  bogus: 1\n")
    with pytest.raises(ConfigError, match="dictlearn"):
        parse_config(MINIMAL + "analysis:\n  dictlearn:\n    bogus: 1\n")
    with pytest.raises(ConfigError, match="eval"):
        parse_config(MINIMAL + "eval:\n  bogus: 1\n")


def test_scenario_and_data_path_are_exclusive():
    with pytest.raises(ConfigError):
        ExperimentConfig()  # neither
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "data_path: rec.csv\ndata_sample_rate: 10.0\n")


def test_external_data_requires_rate_and_source_count():
    with pytest.raises(ConfigError, match="data_sample_rate"):
        parse_config("data_path: rec.csv\nanalysis:\n  n_sources: 4\n")
    with pytest.raises(ConfigError, match="n_sources"):
        parse_config("data_path: rec.csv\ndata_sample_rate: 10.0\n")


def test_scenario_seed_always_tracks_top_level_seed():
    cfg = parse_config(MINIMAL + "scenario:\n  n_channels: 4\n  n_sources: 6\n"
                       "  k_active: 2\n  duration_seconds: 60.0\n"
                       "  sample_rate: 50.0\n  segment_seconds: 2.0\n  seed: 99\n")
    assert cfg.scenario.seed == 7  # in-section seed is ignored
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig(
            scenario=ScenarioConfig(4, 6, 2, 60.0, 50.0, 2.0, seed=1), seed=0
        )


def test_with_overrides_reseeds_scenario_too():
    cfg = parse_config(MINIMAL)
    out = cfg.with_overrides(seed=11, output_dir="elsewhere")
    assert out.seed == 11
    assert out.scenario.seed == 11
    assert out.output_dir == "elsewhere"
    assert cfg.seed == 7  # original untouched


def test_mode_validation():
    cfg = parse_config(MINIMAL + "analysis:\n  mode: covdl2\n")
    assert cfg.analysis.mode == "covdl2"
    with pytest.raises(ConfigError, match="mode"):
        parse_config(MINIMAL + "analysis:\n  mode: pca\n")


def test_invalid_yaml_and_root():
    with pytest.raises(ConfigError, match="YAML"):
        parse_config("a: [unclosed\n")
    with pytest.raises(ConfigError, match="mapping"):
        parse_config("- just\n- a\n- list\n")


def test_eval_threshold_validation():
    with pytest.raises(ConfigError):
        EvalSettings(threshold=0.0)
    with pytest.raises(ConfigError, match="eval"):
        parse_config(MINIMAL + "eval:\n  threshold: 2.0\n")


def test_load_config_checks_paths(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")
    cfg_file = tmp_path / "cfg.yaml"
    cfg_file.write_text(
        "data_path: %s\ndata_sample_rate: 10.0\nanalysis:\n  n_sources: 3\n"
        % (tmp_path / "rec.csv")
    )
    with pytest.raises(ConfigError, match="data_path"):
        load_config(cfg_file)
    np.savetxt(tmp_path / "rec.csv", np.zeros((2, 4)), delimiter=",")
    assert load_config(cfg_file).n_sources == 3


def test_load_config_roundtrip_file(tmp_path):
    cfg = preset("scenario1", seed=4)
    path = tmp_path / "cfg.yaml"
    path.write_text(serialize_config(cfg))
    assert load_config(path) == cfg


def test_sparsity_k_required_for_external_data():
    cfg = parse_config(
        "data_path: rec.csv\ndata_sample_rate: 10.0\nanalysis:\n  n_sources: 4\n"
    )
    with pytest.raises(ConfigError, match="sparsity_k"):
        cfg.sparsity_k()
