"""Joint non-negative projection and dictionary learning (JNPDL).

Learns a non-negative feature projection together with a
class-structured dictionary under discriminative graph constraints,
then classifies single samples or image sets by sparse coding over the
learned model.
"""

from .classification import (
    ClassifierParams,
    classify_frame_fast,
    classify_sample,
    classify_set,
)
from .coding import (
    CoderParams,
    CodingMatrix,
    class_means,
    code_l1,
    code_l2,
    code_l2_batch,
    coding_objective,
    update_training_coeffs,
)
from .config import ExperimentConfig, build_config, parse_config_file
from .datasets import (
    LabeledDataset,
    from_arrays,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .dictionary import (
    Dictionary,
    dictionary_objective,
    init_dictionary,
    update_dictionary,
)
from .errors import ConvergenceError, NumericalError, ValidationError
from .graphs import (
    DiscriminativeGraph,
    GraphParams,
    build_intrinsic_graph,
    build_penalty_graph,
    laplacian_of,
)
from .model_io import load_model, save_model
from .projection import (
    ProjectionModel,
    ProjectionParams,
    project,
    projection_objective,
    update_projection,
)
from .training import (
    GraphSet,
    Hyperparams,
    ObjectiveBreakdown,
    TrainedModel,
    eval_objective,
    initialize,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ClassifierParams", "classify_frame_fast", "classify_sample", "classify_set",
    "CoderParams", "CodingMatrix", "class_means", "code_l1", "code_l2",
    "code_l2_batch", "coding_objective", "update_training_coeffs",
    "ExperimentConfig", "build_config", "parse_config_file",
    "LabeledDataset", "from_arrays", "generate_synthetic", "load_dataset",
    "save_dataset",
    "Dictionary", "dictionary_objective", "init_dictionary", "update_dictionary",
    "ConvergenceError", "NumericalError", "ValidationError",
    "DiscriminativeGraph", "GraphParams", "build_intrinsic_graph",
    "build_penalty_graph", "laplacian_of",
    "load_model", "save_model",
    "ProjectionModel", "ProjectionParams", "project", "projection_objective",
    "update_projection",
    "GraphSet", "Hyperparams", "ObjectiveBreakdown", "TrainedModel",
    "eval_objective", "initialize", "train",
]
