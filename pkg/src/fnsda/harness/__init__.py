from .config import (
    ExperimentConfig,
    adapt_settings_from,
    experiment_defaults,
    experiment_digest,
    load_experiment_config,
    model_config_from,
    parse_experiment_config,
    render_experiment_config,
    train_settings_from,
)
from .evaluate import OracleModel, SurrogateModel, run_extra_trajectory, run_inter_trajectory
from .metrics import (
    MetricsReport,
    TrajectoryRow,
    mape_per_traj,
    merge_reports,
    rmse_per_traj,
)
from .selftest import run_selftest
