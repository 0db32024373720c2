"""Overcomplete mixing-matrix identification in the covariance domain.

Per-segment sample covariances of a linear mixture lie (approximately) in
the span of the lifted mixing columns vech(a_i a_i^T).  This package learns
that structure two ways: dictionary learning plus rank-1 extraction when
there are at least M(M+1)/2 sources, and subspace projector matching when
there are fewer.  A synthetic-data harness, an evaluation protocol, and a
CLI for end-to-end experiments round it out.
"""

from .config import (
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
from .core import (
    CovDl2Config,
    CovDlMode,
    CovDlResult,
    LiftedDictionary,
    SubspaceBasis,
    covdl1,
    covdl2,
    estimate_powers,
    fit_subspace,
    projector_objective,
    rank1_extract,
    select_mode,
)
from .covdomain import (
    ChannelRecording,
    CovarianceDataset,
    SegmentationPlan,
    lift,
    segment,
    vech,
    vech_inv,
)
from .dictlearn import DictLearnConfig, dict_update, learn_dictionary, sparse_code
from .errors import ConfigError, DimensionError, SegmentationError
from .evalmatch import RecoveryReport, correlation_matrix, match_columns, report
from .optim import OptimResult, minimize
from .simgen import (
    GroundTruth,
    MixingMatrix,
    ScenarioConfig,
    forward_mix,
    gen_mixing,
    gen_sources,
    simulate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisSettings",
    "ChannelRecording",
    "ConfigError",
    "CovDl2Config",
    "CovDlMode",
    "CovDlResult",
    "CovarianceDataset",
    "DictLearnConfig",
    "DictLearnSettings",
    "DimensionError",
    "EvalSettings",
    "ExperimentConfig",
    "GroundTruth",
    "LiftedDictionary",
    "MixingMatrix",
    "OptimResult",
    "OptimizerSettings",
    "RecoveryReport",
    "ScenarioConfig",
    "SegmentationError",
    "SegmentationPlan",
    "SubspaceBasis",
    "correlation_matrix",
    "covdl1",
    "covdl2",
    "dict_update",
    "estimate_powers",
    "fit_subspace",
    "forward_mix",
    "gen_mixing",
    "gen_sources",
    "learn_dictionary",
    "lift",
    "load_config",
    "match_columns",
    "minimize",
    "parse_config",
    "preset",
    "projector_objective",
    "rank1_extract",
    "report",
    "segment",
    "select_mode",
    "serialize_config",
    "simulate_scenario",
    "sparse_code",
    "vech",
    "vech_inv",
]
