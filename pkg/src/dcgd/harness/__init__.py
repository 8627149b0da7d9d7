from dcgd.harness.config import ConfigError, ExperimentConfig
from dcgd.harness.records import RunRecord, read_csv, read_run, write_csv, write_run
from dcgd.harness.stats import gradient_stats_report
from dcgd.harness.toy import descent_trace, run_toy, toy_convergence_map
from dcgd.harness.training import Trainer, run_training, run_trials, trial_summary

__all__ = [
    "ConfigError", "ExperimentConfig", "RunRecord", "Trainer", "descent_trace", "gradient_stats_report",
    "read_csv", "read_run", "run_toy", "run_training", "run_trials", "toy_convergence_map",
    "trial_summary", "write_csv", "write_run",
]
