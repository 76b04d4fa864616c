from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .runner import (CSV_COLUMNS, PointResult, RunManifest, RunResult, emit_csv, emit_region_csv,
                     emit_summary, run_experiment, run_region, trend_verdicts)
