"""
hypnoeval: evaluation toolkit for automatic sleep staging.

Soft-voting ensembles of hypnodensities, multi-scorer consensus, agreement
metrics, clinical sleep markers, ensemble-variability features for scorer
disagreement, paired statistics and GAMLSS bias expectations.
"""
__version__ = "0.1.0"

from .core import (
    N_STAGES,
    STAGE_NAMES,
    Hypnodensity,
    Hypnogram,
    RecordingBundle,
    Stage,
    argmax_stage,
    mask_alignment,
    one_hot,
)
from .consensus import (
    ConsensusResult,
    build_consensus,
    consensus_hypnogram,
    probabilistic_consensus,
    soft_agreement,
    soft_agreements,
    soft_consensus,
    soft_consensus_density,
    top_k_scorers,
)
from .disagreement import (
    epoch_features,
    first_principal_component,
    fit_logistic,
    loro_auc,
    pairwise_cosine_distances,
    roc_auc,
    shannon_entropy,
    transition_proximity,
)
from .ensemble import channel_majority_vote, soft_vote
from .errors import HypnoEvalError
from .gamlss import CovariateProfile, bundled_table, expected_value, load_gamlss_table, predict
from .io import load_bundle, parse_hypnodensity_csv, parse_hypnogram_csv, read_manifest, write_report_json
from .markers import MarkerReport, derive_markers, marker_bias
from .metrics import accuracy, acs, class_f1, cohens_kappa, confusion, cosine_similarity, macro_f1, pooled, summary
from .stats import holm_adjust, wilcoxon_one_sided
