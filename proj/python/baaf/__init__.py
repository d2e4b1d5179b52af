"""Python bindings for the baaf filtering library."""

import json

from ._core import (
    BackendConfig,
    BaafConfig,
    BaafError,
    Dataset,
    DegenerateError,
    Detector,
    ParameterError,
    ShapeError,
    SingularityError,
    ValidationError,
    auroc,
    close_anomaly_mask,
    crossover_threshold,
    fit,
    fit_weighted_gmm,
    inject_corruption,
    load_dataset,
    normalize_scores,
    random_split,
    segment_clip,
    synth_generate,
    write_dataset,
)
from ._core import baaf_train as _baaf_train
from ._core import replay_filter_decisions as _replay

__all__ = [
    "BackendConfig", "BaafConfig", "BaafError", "Dataset", "DegenerateError", "Detector",
    "ParameterError", "ShapeError", "SingularityError", "ValidationError", "auroc",
    "baaf_train", "close_anomaly_mask", "crossover_threshold", "fit", "fit_weighted_gmm",
    "inject_corruption", "load_dataset", "normalize_scores", "random_split", "replay",
    "segment_clip", "synth_generate", "write_dataset",
]


def baaf_train(dataset, config=None, threads=1, video=False, closing_window=3, min_clip_length=5):
    """Filter `dataset` and fit the final detector. Returns (detector, report dict)."""
    config = config or BaafConfig()
    detector, text = _baaf_train(dataset, config, threads, video, closing_window, min_clip_length)
    return detector, json.loads(text)


def replay(report):
    """Kept mask recomputed from a report's stored predictions."""
    return _replay(json.dumps(report))
