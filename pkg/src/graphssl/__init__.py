"""Graph-based semi-supervised learning.

Transductive propagation (GFHF, LGC, Fick's-law propagation), a near-linear
Taylor-factorized LGC, posterior distribution learning, manifold k-NN,
deformed-Laplacian regularization and teaching-to-learn curriculum
propagation, plus synthetic benchmarks and a CLI.
"""
from ._backend import BACKEND
from .datasets import gen_blobs, gen_two_moons, load_csv, save_csv
from .deformed import DeformedConfig, deformed_inductive, deformed_penalty, deformed_transductive
from .errors import (
    ConfigError,
    CsvFormatError,
    DisconnectedError,
    GraphConstructionError,
    GraphSSLError,
    InvalidParameterError,
    SingularSystemError,
)
from .experiment import ExperimentConfig, ExperimentReport, accuracy, run_experiment
from .fast_taylor import KernelFactorization, factorize_kernel, fast_lgc, woodbury_apply
from .graph import (
    UNLABELED,
    Dataset,
    Graph,
    GraphConstraints,
    auto_sigma,
    build_constrained_graph,
    build_knn_graph,
    commute_time,
    commute_time_to_set,
    laplacian,
    normalized_smoother,
    random_walk_matrix,
)
from .mknn import (
    ManifoldSimilarity,
    fatigue_similarity,
    mknn_classify,
    online_classify,
    online_similarity,
    reconstruct_weights,
)
from .pdl import (
    KernelModel,
    PdlModel,
    PosteriorEstimate,
    estimate_posteriors,
    fit_pdl,
    fit_posterior_regressor,
    predict_posterior,
    robust_weights,
)
from .propagation import (
    PropagationConfig,
    PropagationResult,
    fick_diffusion_matrix,
    flap,
    flap_closed,
    gfhf,
    lgc_closed,
    lgc_iterate,
)
from .tllt import (
    CurriculumState,
    TeacherConfig,
    discriminability,
    feedback,
    learner_step,
    reliability,
    select_batch,
    tllt_run,
)

__version__ = "0.1.0"
