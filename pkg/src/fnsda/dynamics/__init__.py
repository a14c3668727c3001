from .dataset import (
    DatasetBundle,
    GEN_SUBSTEPS,
    Trajectory,
    generate_dataset,
    load_dataset,
    save_dataset,
    verify_dataset,
)
from .integrators import euler_step, rk4_step, solver_for
from .sampling import sample_initial_condition
from .spectral_ns import NsWorkspace, ns_step, rollout_ns, spectral_divergence
from .systems import (
    FAMILIES,
    STATE_SHAPES,
    EnvironmentSet,
    SystemSpec,
    default_environment_set,
    go_rhs,
    gs_rhs,
    lv_rhs,
)
