"""A four-weight per-voxel logistic segmenter trained on the Dice loss.

Every voxel is described by four features: its intensity, the mean
intensity of its 3x3x3 neighborhood, the central-difference gradient
magnitude and a constant 1.  The model predicts ``sigmoid(w . f)`` and is
fit by full-batch gradient descent on the (soft) Dice loss, averaged over
cases.  All reductions run in a fixed order so training is reproducible
bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dicelosses import loss_and_gradient_array, seqsum
from .postproc import DEFAULT_GRID, PostprocSpec, filter_small_components, binarize, optimal_threshold
from .segmetrics import MetricsRow, aggregate_metrics, case_metrics
from .softmask import SoftMaskSpec, build_soft_mask
from .volcore import REAL64, Dims3, ProbabilityMap, Volume3D, check_same_dims

N_FEATURES = 4
FEATURE_NAMES = ("intensity", "box_mean", "gradient_magnitude", "bias")
STD_FLOOR = 1e-12


class LossMode(enum.Enum):
    BINARY = "binary"
    SOFT = "soft"

    @classmethod
    def parse(cls, value) -> "LossMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True, eq=False)
class FeatureVolume:
    dims: Dims3
    values: np.ndarray  # (n_voxels, 4), rows in flat x-fastest order

    def __post_init__(self):
        if self.values.shape != (self.dims.size, N_FEATURES):
            raise ValueError(f"feature matrix shape {self.values.shape} does not match dims")

    def column(self, k: int) -> Volume3D:
        return Volume3D(self.dims, REAL64, self.values[:, k])


@dataclass(frozen=True)
class ToyModel:
    weights: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} weights, got {len(w)}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class TrainConfig:
    loss_mode: LossMode = LossMode.BINARY
    softmask_spec: SoftMaskSpec = field(default_factory=SoftMaskSpec)
    learning_rate: float = 1e-3
    iterations: int = 500
    init_weights: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    feature_standardization: bool = True

    def __post_init__(self):
        object.__setattr__(self, "loss_mode", LossMode.parse(self.loss_mode))
        if not self.learning_rate >= 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if len(self.init_weights) != N_FEATURES:
            raise ValueError(f"init_weights needs {N_FEATURES} values")
        object.__setattr__(self, "init_weights", tuple(float(v) for v in self.init_weights))


# -- features -----------------------------------------------------------------


def extract_features(intensity: Volume3D) -> FeatureVolume:
    """Per-voxel features with edge-clamped neighborhoods."""
    img = intensity.grid.astype(np.float64)
    nz, ny, nx = img.shape
    pad = np.pad(img, 1, mode="edge")

    box = np.zeros_like(img)
    for dz in range(3):
        for dy in range(3):
            for dx in range(3):
                box += pad[dz : dz + nz, dy : dy + ny, dx : dx + nx]
    box /= 27.0

    gz = (pad[2:, 1:-1, 1:-1] - pad[:-2, 1:-1, 1:-1]) / 2.0
    gy = (pad[1:-1, 2:, 1:-1] - pad[1:-1, :-2, 1:-1]) / 2.0
    gx = (pad[1:-1, 1:-1, 2:] - pad[1:-1, 1:-1, :-2]) / 2.0
    grad = np.sqrt(gx * gx + gy * gy + gz * gz)

    values = np.column_stack(
        (img.reshape(-1), box.reshape(-1), grad.reshape(-1), np.ones(img.size))
    )
    return FeatureVolume(intensity.dims, values)


def _linear(values: np.ndarray, w) -> np.ndarray:
    # explicit sum keeps the evaluation order fixed
    return values[:, 0] * w[0] + values[:, 1] * w[1] + values[:, 2] * w[2] + values[:, 3] * w[3]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def forward(model: ToyModel, features: FeatureVolume) -> ProbabilityMap:
    p = _sigmoid(_linear(features.values, model.weights))
    return ProbabilityMap(features.dims, REAL64, p)


def predict(model: ToyModel, intensity: Volume3D) -> ProbabilityMap:
    return forward(model, extract_features(intensity))


# -- training -----------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    @classmethod
    def identity(cls) -> "Standardizer":
        return cls((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    @classmethod
    def fit(cls, feature_sets: Sequence[np.ndarray]) -> "Standardizer":
        stacked = np.concatenate([f[:, :3] for f in feature_sets], axis=0)
        mean = stacked.mean(axis=0)
        std = np.maximum(stacked.std(axis=0), STD_FLOOR)
        return cls(tuple(float(v) for v in mean), tuple(float(v) for v in std))

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = values.copy()
        out[:, :3] = (values[:, :3] - np.asarray(self.mean)) / np.asarray(self.std)
        return out

    def fold(self, w) -> tuple[float, ...]:
        """Weights on raw features equivalent to ``w`` on standardized ones."""
        raw = [w[k] / self.std[k] for k in range(3)]
        bias = w[3] - sum(w[k] * self.mean[k] / self.std[k] for k in range(3))
        return (*raw, bias)


def loss_and_weight_gradient(
    w, feature_sets: Sequence[np.ndarray], targets: Sequence[np.ndarray]
) -> tuple[float, np.ndarray]:
    """Mean Dice loss over cases and its gradient with respect to ``w``."""
    n_cases = len(feature_sets)
    total_loss = 0.0
    total_grad = np.zeros(N_FEATURES)
    for values, s in zip(feature_sets, targets):
        p = _sigmoid(_linear(values, w))
        loss, dl_dp = loss_and_gradient_array(s, p)
        dl_dz = dl_dp * p * (1.0 - p)
        total_loss += loss
        total_grad += np.array([seqsum(dl_dz * values[:, k]) for k in range(N_FEATURES)])
    return total_loss / n_cases, total_grad / n_cases


def training_targets(cases, config: TrainConfig) -> list[np.ndarray]:
    targets = []
    for intensity, truth in cases:
        check_same_dims(intensity, truth)
        if truth.count() == 0:
            raise ValueError("every training case needs a nonempty truth mask")
        if config.loss_mode is LossMode.SOFT:
            target = build_soft_mask(truth, intensity, config.softmask_spec).volume
        else:
            target = truth.as_real()
        targets.append(target.data)
    return targets


def train(
    cases: Sequence[tuple[Volume3D, Volume3D]], config: TrainConfig | None = None
) -> tuple[ToyModel, list[float]]:
    """Fit a :class:`ToyModel` on ``(intensity, truth)`` pairs.

    Descent runs on standardized features when ``feature_standardization``
    is on (``init_weights`` are read in that space); the returned model is
    folded back so it applies directly to raw features.  ``history[i]`` is
    the mean loss before update ``i``.
    """
    config = config or TrainConfig()
    cases = list(cases)
    if not cases:
        raise ValueError("no training cases")
    targets = training_targets(cases, config)
    raw = [extract_features(intensity).values for intensity, _ in cases]
    scaler = Standardizer.fit(raw) if config.feature_standardization else Standardizer.identity()
    feats = [scaler.apply(v) for v in raw] if config.feature_standardization else raw

    w = np.array(config.init_weights, dtype=np.float64)
    history = []
    for _ in range(config.iterations):
        loss, grad = loss_and_weight_gradient(w, feats, targets)
        history.append(loss)
        w = w - config.learning_rate * grad

    weights = scaler.fold(w) if config.feature_standardization else tuple(w)
    return ToyModel(weights), history


# -- evaluation ---------------------------------------------------------------


@dataclass
class Evaluation:
    rows: list[MetricsRow]
    mean: MetricsRow
    threshold: float


def evaluate(
    model: ToyModel,
    cases: Sequence[tuple[Volume3D, Volume3D]],
    postproc: PostprocSpec | None = None,
    calibration: Sequence[tuple[Volume3D, Volume3D]] | None = None,
    grid: Sequence[float] = DEFAULT_GRID,
    case_ids: Sequence[str] | None = None,
) -> Evaluation:
    """Predict, binarize, drop small components and score each case.

    With ``postproc.threshold`` unset the threshold is chosen by
    :func:`optimal_threshold` on ``calibration`` (default: ``cases``).
    """
    cases = list(cases)
    if not cases:
        raise ValueError("no cases to evaluate")
    postproc = postproc or PostprocSpec(threshold=None)
    probs = [predict(model, intensity) for intensity, _ in cases]

    threshold = postproc.threshold
    if threshold is None:
        if calibration is None:
            calib = [(truth, p) for (_, truth), p in zip(cases, probs)]
        else:
            calib = [(truth, predict(model, intensity)) for intensity, truth in calibration]
        threshold = optimal_threshold(calib, grid)

    ids = list(case_ids) if case_ids is not None else [str(i) for i in range(len(cases))]
    rows = []
    for (_, truth), prob, cid in zip(cases, probs, ids):
        mask = binarize(prob, threshold)
        mask = filter_small_components(mask, postproc.min_component_size, postproc.conn)
        rows.append(case_metrics(truth, mask, cid))
    return Evaluation(rows, aggregate_metrics(rows), threshold)


# -- model files --------------------------------------------------------------


def format_model(model: ToyModel) -> str:
    return "TOYMODEL 1\n" + "".join(f"{w:.16e}\n" for w in model.weights)


def parse_model(text: str) -> ToyModel:
    lines = text.splitlines()
    if len(lines) != 1 + N_FEATURES or lines[0] != "TOYMODEL 1":
        raise ValueError("not a TOYMODEL 1 file")
    try:
        return ToyModel(tuple(float(v) for v in lines[1:]))
    except ValueError:
        raise ValueError("malformed weight line in model file") from None


def save_model(model: ToyModel, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_model(model))


def load_model(path) -> ToyModel:
    with open(path, encoding="ascii") as fh:
        return parse_model(fh.read())
