"""Active learning of linear classifiers from labels, selections, and rankings."""

from .accel import NUMBA_ENABLED
from .belief import (
    ConvergenceWarning,
    GaussianBelief,
    StoppingRule,
    UpdateSettings,
    isotropic_belief,
    joint_update,
    label_update,
    mse_floor,
    ranking_update,
    selection_update,
    should_stop,
)
from .committee import Committee, disagreement, greedy_build, sample_committee
from .dataset import (
    AffineScoreFit,
    EmbeddedItem,
    GroundTruth,
    GumbelFit,
    ItemPool,
    RawItem,
    embed_raw,
    fit_affine_score,
    fit_ground_truth,
    fit_gumbel,
    load_pool,
)
from .harness import (
    ExperimentConfig,
    TraceRecord,
    apply_response,
    evaluate_accuracy,
    export_trace,
    import_trace,
    run_experiment,
)
from .policy import (
    CostModel,
    InfoRateTable,
    build_rate_table,
    estimate_info_ratios,
    fit_cost_model,
    predict_cost,
    reference_cost_model,
    select_query_config,
)
from .responses import (
    LabelAnswer,
    Query,
    QueryKind,
    RankingAnswer,
    ResponseParams,
    SelectionAnswer,
    SimulatedAnnotator,
    label_likelihood,
    ranking_likelihood,
    response_likelihood,
    selection_likelihood,
    simulate_answer,
)
from .session import SessionManager, replay_history
from .synthetic import make_gumbel_annotator, make_synthetic_task
from .theory import BoundInput, LikelihoodFloor, StoppingBounds, likelihood_floor, stopping_bounds

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
