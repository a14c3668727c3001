from .adapt import AdaptResult, AdaptSettings, adapt, adaptation_states, baseline_adapt_full
from .checkpoint import (
    Checkpoint,
    config_digest,
    load_checkpoint,
    params_digest,
    save_checkpoint,
)
from .loss import context_penalty, rollout_loss, trajectory_loss
from .train import TrainRun, TrainSettings, baseline_train_erm, train
