"""Decision machines: residual thresholding, NPE likelihoods, 1-D CNN and
their confidence-gated ensemble."""

from .cnn import (AdamW, Cnn1DClassifier, CnnModel, TrainConfig, TrainHistory,
                  cnn_flops, cnn_forward, cnn_train, shape_chain)
from .ensemble import (CNN_PATH, PROB_PATH, EnsembleClassifier, EnsembleModel,
                       confidence_grid, ensemble_classify, f1_vs_confidence,
                       select_confidence)
from .probabilistic import (NpeLikelihoodClassifier, ResidualDistributions,
                            exponential_pdf, fit_distributions,
                            fit_exponential, fit_gaussian, gaussian_pdf,
                            prob_classify)
from .threshold import (ABNORMAL, NORMAL, ResidualThresholdDetector,
                        ThresholdClassifier, best_threshold, f1_vs_threshold,
                        threshold_classify)

__all__ = [
    "ABNORMAL", "AdamW", "CNN_PATH", "Cnn1DClassifier", "CnnModel",
    "EnsembleClassifier", "EnsembleModel", "NORMAL", "NpeLikelihoodClassifier",
    "PROB_PATH", "ResidualDistributions", "ResidualThresholdDetector",
    "ThresholdClassifier", "TrainConfig", "TrainHistory", "best_threshold",
    "cnn_flops", "cnn_forward", "cnn_train", "confidence_grid",
    "ensemble_classify", "exponential_pdf", "f1_vs_confidence",
    "f1_vs_threshold", "fit_distributions", "fit_exponential", "fit_gaussian",
    "gaussian_pdf", "prob_classify", "select_confidence", "shape_chain",
    "threshold_classify",
]
