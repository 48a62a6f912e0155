"""Open-set active learning on precomputed embeddings.

Two-stage query selection: zero-shot ID/OOD purity scoring with tuned
temperature and visual-prototype weighting, followed by least-confidence
informativeness ranking, evaluated inside a deterministic annotation-loop
simulator with RANDOM / CONF / CORESET baselines.
"""

from .embstore import (
    DatasetManifest,
    OpenSetPool,
    PoolSpec,
    build_open_set_pool,
    oracle_annotate,
    read_embeddings,
    write_embeddings,
)
from .probe import LinearSoftmaxProbe, ProbeConfig
from .purity import (
    OpenSetPurityDetector,
    PromptEmbeddings,
    Prototypes,
    PurityScores,
    assess_purity,
    average_prompt_embeddings,
    class_prototypes,
    clipn_scores,
    tune_temperature,
    weighted_scores,
)
from .simulator import (
    DataBundle,
    ExperimentConfig,
    ExperimentPaths,
    ExperimentResult,
    RoundLog,
    aubc_metric,
    precision_metric,
    run_experiment,
)
from .strategies import (
    QueryResult,
    clipnal_select,
    conf_scores,
    coreset_select,
    random_select,
)
from .synth import SynthSpec, generate_synthetic, prompts_from_matrix, prompts_to_matrix

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "OpenSetPool",
    "PoolSpec",
    "build_open_set_pool",
    "oracle_annotate",
    "read_embeddings",
    "write_embeddings",
    "LinearSoftmaxProbe",
    "ProbeConfig",
    "OpenSetPurityDetector",
    "PromptEmbeddings",
    "Prototypes",
    "PurityScores",
    "assess_purity",
    "average_prompt_embeddings",
    "class_prototypes",
    "clipn_scores",
    "tune_temperature",
    "weighted_scores",
    "DataBundle",
    "ExperimentConfig",
    "ExperimentPaths",
    "ExperimentResult",
    "RoundLog",
    "aubc_metric",
    "precision_metric",
    "run_experiment",
    "QueryResult",
    "clipnal_select",
    "conf_scores",
    "coreset_select",
    "random_select",
    "SynthSpec",
    "generate_synthetic",
    "prompts_from_matrix",
    "prompts_to_matrix",
]
