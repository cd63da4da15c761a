"""Soft-label ground truth masks and the effective soft Dice loss."""

from .dicelosses import (
    ConfusionCounts,
    LossValue,
    confusion_counts,
    dice_loss,
    dice_loss_gradient,
    soft_dice_loss,
)
from .morph3d import FACE6, FULL26, ComponentLabeling, Connectivity, connected_components, dilate, erode
from .postproc import PostprocSpec, binarize, filter_small_components, optimal_threshold
from .segmetrics import MetricsRow, aggregate_metrics, dice_coefficient, precision_recall
from .softmask import SoftMask, SoftMaskSpec, build_soft_mask, flair_gate_threshold
from .synthgen import Rng64, SynthCase, SynthParams, gaussian_pair, generate_case, splitmix64_next
from .toytrain import LossMode, ToyModel, TrainConfig, evaluate, extract_features, forward, train
from .volcore import Dims3, ProbabilityMap, Volume3D, linear_index, read_svol, write_svol

__version__ = "0.1.0"
