"""Personalized training-set synthesis: morphology transforms and ABS."""

from .abs import (AbsFilter, AbsLibrary, average_normal_beat,
                  build_abs_library, convolution_matrix, estimate_abs_filter,
                  prune_filters, same_convolve, synthesize_abnormal,
                  synthesize_beatset, tile_trio)
from .mtm import (MorphologyAdapter, MorphTransform, apply_mtm, learn_mtm,
                  mtm_gradient, mtm_objective)

__all__ = [
    "AbsFilter", "AbsLibrary", "MorphTransform", "MorphologyAdapter",
    "apply_mtm", "average_normal_beat", "build_abs_library",
    "convolution_matrix", "estimate_abs_filter", "learn_mtm", "mtm_gradient",
    "mtm_objective", "prune_filters", "same_convolve", "synthesize_abnormal",
    "synthesize_beatset", "tile_trio",
]
