"""Mitotic figure detection and subtyping: imaging, synthetic data and metrics."""

from ._core import (
    MitoError,
    assemble_targets,
    balanced_accuracy,
    classical_pseudomask,
    combine_losses,
    default_run_config,
    lr_at,
    match_detections,
    micro_f1,
    morphological_open,
    otsu_threshold,
    synth_dataset,
    threshold_sweep,
    tile_region,
)

HIT_RADIUS_UM = 7.5
SUBTYPE_THRESHOLD = 0.590

__all__ = [
    "MitoError",
    "assemble_targets",
    "balanced_accuracy",
    "classical_pseudomask",
    "combine_losses",
    "default_run_config",
    "lr_at",
    "match_detections",
    "micro_f1",
    "morphological_open",
    "otsu_threshold",
    "synth_dataset",
    "threshold_sweep",
    "tile_region",
    "HIT_RADIUS_UM",
    "SUBTYPE_THRESHOLD",
]
