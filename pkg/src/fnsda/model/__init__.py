from .config import (
    ModelConfig,
    default_model_config,
    manual_partition_gate,
    mode_indices,
)
from .fnsda import (
    EnvContext,
    condition_weights,
    count_adapted_params,
    count_params,
    fourier_layer,
    gate_values,
    init_params,
    lift,
    model_forward,
    project,
    spectral_kernel,
    split_complex,
    split_modes,
    trainable_names,
)
