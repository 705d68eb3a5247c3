"""svtfair: singular value thresholding as a pre-processing stage, with
individual-fairness certificates, downstream predictors, and an
experiment harness."""

from .errors import NumericalError, ValidationError
from .linalg import (
    ObservationMatrix,
    SpectralDecomposition,
    column_l1_max,
    entrywise_max_abs,
    lq_row_distance,
    nuclear_norm,
    svd,
)
from .estimation import (
    ShrinkageFn,
    SvtEstimate,
    impute_zeros,
    mse_vs_truth,
    svt,
    usvt_threshold,
)
from .fairness import (
    FairnessCertificate,
    IfRatio,
    certify,
    check_latent_fairness_bound,
    check_observed_fairness_bound,
    if_ratio,
    incoherence_parameter,
    pairwise_ratio_sample,
    random_unit_functional,
    svt_lipschitz_bound,
    svt_lipschitz_constant,
)
from .knn import KnnConfig, adjusted_cosine_similarity, knn_predict, knn_predict_all
from .mlp import (
    MlpModel,
    TrainConfig,
    gradient_check,
    init_model,
    load_model,
    mlp_predict_matrix,
    mlp_predict_row,
    mlp_train,
    save_model,
    split_observed_cells,
)
from .datagen import NoiseConfig, SynthConfig, gen_ground_truth, mask_cluster, mask_uniform
from .ingest import load_movielens
from .matrix_io import load_dense, load_observations, read_matrix, write_matrix

__version__ = "0.1.0"

__all__ = [
    "NumericalError",
    "ValidationError",
    "ObservationMatrix",
    "SpectralDecomposition",
    "svd",
    "entrywise_max_abs",
    "column_l1_max",
    "lq_row_distance",
    "nuclear_norm",
    "ShrinkageFn",
    "SvtEstimate",
    "impute_zeros",
    "usvt_threshold",
    "svt",
    "mse_vs_truth",
    "FairnessCertificate",
    "IfRatio",
    "certify",
    "svt_lipschitz_constant",
    "svt_lipschitz_bound",
    "incoherence_parameter",
    "if_ratio",
    "pairwise_ratio_sample",
    "check_observed_fairness_bound",
    "check_latent_fairness_bound",
    "random_unit_functional",
    "KnnConfig",
    "adjusted_cosine_similarity",
    "knn_predict",
    "knn_predict_all",
    "MlpModel",
    "TrainConfig",
    "init_model",
    "mlp_train",
    "mlp_predict_row",
    "mlp_predict_matrix",
    "gradient_check",
    "split_observed_cells",
    "save_model",
    "load_model",
    "NoiseConfig",
    "SynthConfig",
    "gen_ground_truth",
    "mask_uniform",
    "mask_cluster",
    "load_movielens",
    "write_matrix",
    "read_matrix",
    "load_dense",
    "load_observations",
    "__version__",
]
