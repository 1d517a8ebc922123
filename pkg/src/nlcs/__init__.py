"""Graph semi-supervised learning with triangle-aware correct-and-smooth.

Label propagation and normalized higher-order (triangle) label spreading,
plus post-processing of arbitrary base predictions: residual correction
through nonlinear triangle operators followed by label-anchored smoothing,
with the edge-only linear variant as a baseline. Ships desk-scale base
models, dataset tooling, and an experiment harness.
"""

from .graph import (Graph, NormalizedAdjacency, TriangleSet, build_graph,
                    clustering_coefficient, enumerate_triangles, normalized_adjacency,
                    read_edge_file)
from .mixing import MIXING_FUNCTIONS, get_mixing
from .spreading import (HigherOrderLabelSpreading, LabelMatrix, LabelPropagation,
                        PropagationParams, lp_iterate, nhols_iterate, nonlinear_map,
                        predict_argmax, spreading_norm, tensor_map)
from .postprocess import (CorrectAndSmooth, NonlinearCorrectAndSmooth, autoscale,
                          correct, error_init, linear_correct_and_smooth,
                          residual_propagate, smooth)
from .models import (BasePrediction, LinearSoftmaxClassifier, MLPClassifier,
                     SpectralEmbedding, TrainConfig, TrainingDivergence,
                     spectral_embedding, train_linear_softmax, train_mlp)
from .datasets import (Dataset, ExperimentConfig, SplitSpec, config_to_text,
                       load_dataset, parse_config, save_dataset, seed_pair,
                       splitmix64, stratified_split)
from .experiments import (RunResult, accuracy, coefficient_binned_accuracy,
                          grid_search, margin_rows, pca_export, pca_project,
                          run_experiment, summarize, timeline_eval)

__version__ = "0.1.0"

__all__ = [
    "Graph", "NormalizedAdjacency", "TriangleSet", "build_graph",
    "clustering_coefficient", "enumerate_triangles", "normalized_adjacency",
    "read_edge_file",
    "MIXING_FUNCTIONS", "get_mixing",
    "HigherOrderLabelSpreading", "LabelMatrix", "LabelPropagation",
    "PropagationParams", "lp_iterate", "nhols_iterate", "nonlinear_map",
    "predict_argmax", "spreading_norm", "tensor_map",
    "CorrectAndSmooth", "NonlinearCorrectAndSmooth", "autoscale", "correct",
    "error_init", "linear_correct_and_smooth", "residual_propagate", "smooth",
    "BasePrediction", "LinearSoftmaxClassifier", "MLPClassifier",
    "SpectralEmbedding", "TrainConfig", "TrainingDivergence",
    "spectral_embedding", "train_linear_softmax", "train_mlp",
    "Dataset", "ExperimentConfig", "SplitSpec", "config_to_text", "load_dataset",
    "parse_config", "save_dataset", "seed_pair", "splitmix64", "stratified_split",
    "RunResult", "accuracy", "coefficient_binned_accuracy", "grid_search",
    "margin_rows", "pca_export", "pca_project", "run_experiment", "summarize",
    "timeline_eval",
]
