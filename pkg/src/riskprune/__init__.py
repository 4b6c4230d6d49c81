"""Distribution-free certification of global magnitude pruning."""

from .calibration import (
    CalibrationResult,
    PruningCalibrator,
    SegmentationPruningCalibrator,
    SelectiveCalibrationResult,
    SelectivePruningCalibrator,
    build_grid,
    calibrate_1d,
    calibrate_risks,
    calibrate_segmentation,
    calibrate_selective,
    risk_curve,
    select_pair,
)
from .fwer import fallback_graph, fixed_sequence
from .network import DenseNetwork, Layer, NetworkClassifier, count_parameters, forward, predict, train_sgd
from .pruning import MagnitudePruner, PruneMask, PrunedNetwork, compute_threshold, propagate_dead_neurons, prune, sparsity
from .pvalues import binom_cdf, p_binomial, p_hb, p_prw
from .validation import bootstrap_risk, simulate_fwer, simulate_superuniformity

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult",
    "DenseNetwork",
    "Layer",
    "MagnitudePruner",
    "NetworkClassifier",
    "PruneMask",
    "PrunedNetwork",
    "PruningCalibrator",
    "SegmentationPruningCalibrator",
    "SelectiveCalibrationResult",
    "SelectivePruningCalibrator",
    "binom_cdf",
    "bootstrap_risk",
    "build_grid",
    "calibrate_1d",
    "calibrate_risks",
    "calibrate_segmentation",
    "calibrate_selective",
    "compute_threshold",
    "count_parameters",
    "fallback_graph",
    "fixed_sequence",
    "forward",
    "p_binomial",
    "p_hb",
    "p_prw",
    "predict",
    "propagate_dead_neurons",
    "prune",
    "risk_curve",
    "select_pair",
    "simulate_fwer",
    "simulate_superuniformity",
    "sparsity",
    "train_sgd",
]
