"""Causal sensing-beam selection for mmWave beam alignment.

Synthesizes RSSI/beam-label datasets from a geometric multipath model,
recovers a causal graph over the RSSI features with DirectLiNGAM, selects a
minimal causally relevant sensing-beam subset, trains an MLP beam
classifier on the reduced inputs, and benchmarks accuracy, effective
spectral efficiency, overhead and selection runtime against non-causal
baselines.
"""

from .channel import (
    Codebook,
    PathSet,
    beam_gain,
    best_beam,
    dft_codebook,
    quantized_mrt,
    snr,
    steering_vector,
    synth_channel,
)
from .evaluate import (
    BenchConfig,
    BenchReport,
    SeConfig,
    effective_se,
    evaluate_method,
    evaluate_trained,
    overhead,
    run_bench,
    sweep_m_tilde,
    time_selection,
    top_k_accuracy,
)
from .lingam import (
    CausalGraph,
    DirectLiNGAM,
    causal_order,
    discover,
    estimate_effects,
    independence_score,
    load_graph,
    save_graph,
)
from .mlp import (
    BeamClassifier,
    MlpModel,
    TrainConfig,
    cross_entropy,
    forward,
    init_model,
    load_model,
    predict_topk,
    save_model,
    train,
)
from .scene import (
    Dataset,
    SceneConfig,
    build_dataset,
    generate_scene,
    load_dataset,
    save_dataset,
    sweep_rssi,
)
from .selection import (
    CausalBeamSelector,
    CorrelationSelector,
    RandomBeamSelector,
    SelectionResult,
    causal_select,
    connectivity,
    correlation_select,
    direct_parents,
    load_selection,
    random_select,
    sampled_shapley,
    save_selection,
    shapley_select,
)
from .validation import ConfigError, DataFormatError

__version__ = "0.1.0"

__all__ = [
    "BeamClassifier",
    "BenchConfig",
    "BenchReport",
    "CausalBeamSelector",
    "CausalGraph",
    "Codebook",
    "ConfigError",
    "CorrelationSelector",
    "DataFormatError",
    "Dataset",
    "DirectLiNGAM",
    "MlpModel",
    "PathSet",
    "RandomBeamSelector",
    "SceneConfig",
    "SeConfig",
    "SelectionResult",
    "TrainConfig",
    "beam_gain",
    "best_beam",
    "causal_order",
    "causal_select",
    "connectivity",
    "correlation_select",
    "cross_entropy",
    "dft_codebook",
    "direct_parents",
    "discover",
    "effective_se",
    "estimate_effects",
    "evaluate_method",
    "evaluate_trained",
    "forward",
    "generate_scene",
    "independence_score",
    "init_model",
    "load_dataset",
    "load_graph",
    "load_model",
    "load_selection",
    "overhead",
    "predict_topk",
    "quantized_mrt",
    "random_select",
    "run_bench",
    "sampled_shapley",
    "save_dataset",
    "save_graph",
    "save_model",
    "save_selection",
    "shapley_select",
    "snr",
    "steering_vector",
    "sweep_m_tilde",
    "sweep_rssi",
    "synth_channel",
    "time_selection",
    "top_k_accuracy",
    "train",
    "build_dataset",
]
