"""Simulator for reflecting-surface pilot contamination attacks and defenses.

Library layout mirrors the processing chain: core numerics, scenario
construction and block sampling, sequential detection, data-phase
transmission quantities, cooperative direction estimation with zero-forcing,
and an experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .core import (RngStream, dominant_eigenpair, gamma_tail_quantile,
                   sample_complex_gaussian, scaled_exp_integral,
                   steering_vector)
from .detection import (DetectorConfig, GcusumState, MetricReport,
                        TrialOutcome, calibrate, ed_step, estimate_metrics,
                        gcusum_statistic, gcusum_step, run_trial, run_trials)
from .errors import (ConfigError, ContractError, DegenerateInputError,
                     NumericError)
from .estimation import (CnObservation, EstimationResult, cn_observations,
                         estimate_irs_direction, zf_beam, zf_snr_limit)
from .harness import (ExperimentSpec, ResultTable, emit_csv, experiment_spec,
                      figure_spec, parse_config, read_csv, run_experiment)
from .scenario import (BlockChannels, Scenario, ScenarioConfig,
                       attack_amplitudes, build_scenario, reflection_matrices,
                       rpt_observation, sample_block)
from .transmission import (DtOutcome, dt_outcome, mrt_beam,
                           mrt_capacity_bound, no_irs_expected_capacity,
                           wtg_increment)

__all__ = [
    "RngStream", "dominant_eigenpair", "gamma_tail_quantile",
    "sample_complex_gaussian", "scaled_exp_integral", "steering_vector",
    "DetectorConfig", "GcusumState", "MetricReport", "TrialOutcome",
    "calibrate", "ed_step", "estimate_metrics", "gcusum_statistic",
    "gcusum_step", "run_trial", "run_trials",
    "ConfigError", "ContractError", "DegenerateInputError", "NumericError",
    "CnObservation", "EstimationResult", "cn_observations",
    "estimate_irs_direction", "zf_beam", "zf_snr_limit",
    "ExperimentSpec", "ResultTable", "emit_csv", "experiment_spec",
    "figure_spec", "parse_config", "read_csv", "run_experiment",
    "BlockChannels", "Scenario", "ScenarioConfig", "attack_amplitudes",
    "build_scenario", "reflection_matrices", "rpt_observation", "sample_block",
    "DtOutcome", "dt_outcome", "mrt_beam", "mrt_capacity_bound",
    "no_irs_expected_capacity", "wtg_increment",
]
