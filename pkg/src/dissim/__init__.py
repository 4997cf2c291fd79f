"""Loss-based learning of latent-variable predictors.

Learns a joint (label, latent) linear predictor together with a
log-linear latent conditional by minimizing a dissimilarity coefficient
between the delta distribution the predictor places on its argmax and
the conditional.  Ships a CCCP cutting-plane solver for the prediction
parameters, a Pegasos-style stochastic subgradient solver for the
distribution parameters, latent-SVM baselines, a synthetic localization
benchmark, and a command line harness.
"""

from .errors import ConfigError, DissimError, InputError, SolverError
from .model import (
    Dataset,
    FiniteDistribution,
    LatentValue,
    ModelParams,
    SampleRecord,
    conditional_distribution,
    joint_conditional,
    latent_posterior,
    log_partition,
    predict,
    score,
    score_table,
)
from .losses import (
    LOSS_KINDS,
    HyperParams,
    LabelOnlyZeroOneLoss,
    LossFunction,
    OverlapLoss,
    ZeroOneLoss,
    dissimilarity,
    dissimilarity_objective,
    diversity,
    expected_loss,
    expected_loss_table,
    iou_matrix,
    make_loss,
    overlap_ratio,
    regularized_objective,
    self_diversity,
    slack,
    upper_bound,
)
from .wsolver import (
    CuttingPlane,
    WSolverReport,
    cccp_w,
    latent_impute,
    loss_augmented_argmax,
    solve_inner_convex,
)
from .thetasolver import (
    SSDConfig,
    grad_expected_loss,
    grad_self_diversity,
    grad_slack,
    ssd_theta,
    theta_objective,
)
from .baselines import (
    delta_restricted_objective,
    ilsvm_latent_estimates,
    ilsvm_train,
    lsvm_train,
)
from .trainer import (
    DEFAULT_C_GRID,
    METHODS,
    CurvePoint,
    FoldResult,
    ProtocolResult,
    TrainConfig,
    TrainedModel,
    evaluate,
    run_protocol,
    stratified_split,
    train,
)
from .synth import TaskSpec, generate, oracle_objective, template_model
from .gradcheck import GradCheckResult, run_gradient_checks
from .dataio import (
    ModelRecord,
    ResultRow,
    load_dataset,
    load_model,
    load_results,
    save_dataset,
    save_model,
    save_results,
)

__all__ = [name for name in dir() if not name.startswith("_")]
