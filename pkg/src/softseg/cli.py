"""Command line interface.

Exit codes: 0 on success, 1 for usage or validation errors, 2 for data and
I/O errors.  Metrics are printed x100 with one decimal; losses with six.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .dicelosses import dice_loss, soft_dice_loss
from .morph3d import Connectivity
from .postproc import DEFAULT_GRID, DEFAULT_MIN_COMPONENT, PostprocSpec, binarize, filter_small_components
from .segmetrics import case_metrics
from .softmask import DEFAULT_FLAIR_PERCENTILE, SoftMaskSpec, build_soft_mask
from .synthgen import SynthParams, read_dataset, write_dataset
from .toytrain import LossMode, TrainConfig, evaluate, save_model, train
from .volcore import Dims3, MASK8, ProbabilityMap, Volume3D, load, save

SWEEP_HEADER = (
    "target_percent",
    "gamma",
    "dice_r1",
    "dice_r2",
    "precision_r1",
    "precision_r2",
    "recall_r1",
    "recall_r2",
)
EVAL_HEADER = ("case_id", "dice", "precision", "recall", "loss")
METRICS_HEADER = ("case_id", "dice", "precision", "recall")


class UsageError(Exception):
    exit_code = 1


class DataError(Exception):
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _load(path) -> Volume3D:
    try:
        return load(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _save(vol: Volume3D, path) -> None:
    try:
        save(vol, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def _mask(vol: Volume3D, path) -> Volume3D:
    if vol.dtype != MASK8:
        raise DataError(f"{path}: expected a u8 mask volume")
    return vol


def _prob(vol: Volume3D, path) -> ProbabilityMap:
    try:
        return ProbabilityMap.from_volume(vol.as_real())
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


# -- sweep ----------------------------------------------------------------------


@dataclass
class SweepConfig:
    """Grid of soft-mask settings to train and score on one dataset.

    JSON keys mirror the field names; ``train`` holds :class:`TrainConfig`
    overrides (``learning_rate``, ``iterations``, ``init_weights``,
    ``feature_standardization``) and ``flair_percentile``.
    """

    dataset_dir: Path
    target_percents: list[int] = field(default_factory=lambda: [100, 110, 120, 130, 140])
    gammas: list[float] = field(default_factory=lambda: [0.0, 0.2, 0.3, 0.4])
    seeds: list[int] | None = None
    train: dict = field(default_factory=dict)
    min_component_size: int = DEFAULT_MIN_COMPONENT
    threshold_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    holdout: bool = False

    def __post_init__(self):
        if not self.target_percents or not self.gammas:
            raise ValueError("target_percents and gammas must be nonempty")
        for p in self.target_percents:
            if int(p) != p or p < 100:
                raise ValueError(f"target percent {p} must be an integer >= 100")
        for g in self.gammas:
            if not 0.0 <= g < 1.0:
                raise ValueError(f"gamma {g} outside [0, 1)")
        unknown = set(self.train) - {
            "learning_rate",
            "iterations",
            "init_weights",
            "feature_standardization",
            "flair_percentile",
        }
        if unknown:
            raise ValueError(f"unknown train overrides: {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        path = Path(path)
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("sweep config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown sweep config keys: {sorted(extra)}")
        if "dataset_dir" not in raw:
            raise ValueError("sweep config needs 'dataset_dir'")
        data_dir = Path(raw["dataset_dir"])
        if not data_dir.is_absolute():
            data_dir = path.parent / data_dir
        raw["dataset_dir"] = data_dir
        return cls(**raw)


@dataclass(frozen=True)
class SweepRow:
    target_percent: int
    gamma: float
    dice_r1: float
    dice_r2: float
    precision_r1: float
    precision_r2: float
    recall_r1: float
    recall_r2: float

    def cells(self) -> list[str]:
        return [
            str(self.target_percent),
            repr(float(self.gamma)),
            *(pct(getattr(self, k)) for k in SWEEP_HEADER[2:]),
        ]


def run_sweep(config: SweepConfig, conn=Connectivity.FACE6, log=None) -> list[SweepRow]:
    cases = read_dataset(config.dataset_dir, config.seeds)
    if not cases:
        raise ValueError("dataset has no cases")
    if config.holdout:
        train_cases = [c for c in cases if c.seed % 2 == 0]
        test_cases = [c for c in cases if c.seed % 2 == 1]
        if not train_cases or not test_cases:
            raise ValueError("holdout needs both even and odd seeds")
    else:
        train_cases = test_cases = cases

    overrides = dict(config.train)
    percentile = overrides.pop("flair_percentile", DEFAULT_FLAIR_PERCENTILE)
    base = TrainConfig(loss_mode=LossMode.SOFT, **overrides)
    fit_pairs = [(c.intensity, c.truth_r1) for c in train_cases]
    ids = [c.case_id for c in test_cases]

    rows = []
    for target in sorted(int(p) for p in config.target_percents):
        for gamma in sorted(float(g) for g in config.gammas):
            spec = SoftMaskSpec(target, gamma, percentile, conn)
            model, _ = train(fit_pairs, replace(base, softmask_spec=spec))
            post = PostprocSpec(None, config.min_component_size, conn)
            r1 = evaluate(
                model,
                [(c.intensity, c.truth_r1) for c in test_cases],
                post,
                calibration=fit_pairs,
                grid=config.threshold_grid,
                case_ids=ids,
            )
            r2 = evaluate(
                model,
                [(c.intensity, c.truth_r2) for c in test_cases],
                replace(post, threshold=r1.threshold),
                case_ids=ids,
            )
            row = SweepRow(
                target,
                gamma,
                r1.mean.dice,
                r2.mean.dice,
                r1.mean.precision,
                r2.mean.precision,
                r1.mean.recall,
                r2.mean.recall,
            )
            if log:
                log(f"target={target}% gamma={gamma}: dice_r1={pct(row.dice_r1)} threshold={r1.threshold}")
            rows.append(row)
    return rows


def format_sweep(rows: Sequence[SweepRow]) -> str:
    return _csv_text([SWEEP_HEADER, *(r.cells() for r in rows)])


# -- commands --------------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    try:
        params = SynthParams(
            dims=Dims3(*args.dims),
            lesion_count=args.lesion_count,
            radius_range=(args.radius_min, args.radius_max),
            base_intensity=args.base_intensity,
            contrast=args.contrast,
            noise_sigma=args.noise_sigma,
            rater2_erosion=args.rater2_erosion,
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    seeds = range(args.seed, args.seed + args.count)
    try:
        write_dataset(args.out, seeds, params)
    except OSError as exc:
        raise DataError(f"cannot write dataset to {args.out}: {exc}") from None
    print(f"wrote {args.count} cases to {args.out}", file=sys.stderr)
    return 0


def cmd_build_softmask(args) -> int:
    try:
        spec = SoftMaskSpec(args.target_size, args.gamma, args.flair_percentile, args.conn)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth = _mask(_load(args.mask), args.mask)
    flair = _load(args.flair).as_real()
    try:
        soft = build_soft_mask(truth, flair, spec)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _save(soft.volume, args.out)
    if args.dilated_out:
        _save(soft.dilated, args.dilated_out)
    print(
        f"truth={truth.count()} soft={soft.dilated.count()} target={soft.target} gate={soft.threshold:.6g}",
        file=sys.stderr,
    )
    return 0


def cmd_eval(args) -> int:
    if not 0.0 <= args.threshold <= 1.0:
        raise UsageError("--threshold must lie in [0, 1]")
    if args.min_component < 1:
        raise UsageError("--min-component must be >= 1")
    if args.soft and (args.dilated is None or args.gamma is None):
        raise UsageError("--soft needs --dilated and --gamma")
    if args.soft and not 0.0 <= args.gamma < 1.0:
        raise UsageError("--gamma must satisfy 0 <= gamma < 1")
    truth = _mask(_load(args.truth), args.truth)
    pred = _prob(_load(args.pred), args.pred)
    try:
        if args.soft:
            dilated = _mask(_load(args.dilated), args.dilated)
            loss = soft_dice_loss(truth, dilated, args.gamma, pred)
        else:
            loss = dice_loss(truth, pred)
        mask = filter_small_components(binarize(pred, args.threshold), args.min_component, args.conn)
        row = case_metrics(truth, mask, args.case_id)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    sys.stdout.write(_csv_text([EVAL_HEADER, [row.case_id, *row.scaled(), f"{loss.value + 0.0:.6f}"]]))
    return 0


def cmd_metrics(args) -> int:
    truth = _mask(_load(args.truth), args.truth)
    pred = _mask(_load(args.pred), args.pred)
    try:
        row = case_metrics(truth, pred, args.case_id)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    sys.stdout.write(_csv_text([METRICS_HEADER, [row.case_id, *row.scaled()]]))
    return 0


def cmd_postprocess(args) -> int:
    try:
        spec = PostprocSpec(args.threshold, args.min_component, args.conn)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    prob = _prob(_load(args.prob), args.prob)
    mask = filter_small_components(binarize(prob, spec.threshold), spec.min_component_size, spec.conn)
    _save(mask, args.out)
    print(f"kept {mask.count()} voxels", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    try:
        spec = SoftMaskSpec(args.target_size, args.gamma, args.flair_percentile, args.conn)
        config = TrainConfig(
            loss_mode=args.loss,
            softmask_spec=spec,
            learning_rate=args.lr,
            iterations=args.iterations,
            init_weights=tuple(args.init) if args.init else (0.0, 0.0, 0.0, 0.0),
            feature_standardization=not args.no_standardize,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        cases = read_dataset(args.data, args.seeds)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if not cases:
        raise DataError(f"{args.data}: no cases")
    try:
        model, history = train([(c.intensity, c.truth_r1) for c in cases], config)
        save_model(model, args.out)
        if args.history:
            with open(args.history, "w", newline="") as fh:
                fh.write(_csv_text([("iteration", "loss"), *((i, repr(h)) for i, h in enumerate(history))]))
    except OSError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print(f"final loss {history[-1]:.6f}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    try:
        config = SweepConfig.from_json(args.config)
    except FileNotFoundError:
        raise DataError(f"no such file: {args.config}") from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    if args.holdout:
        config.holdout = True
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    try:
        rows = run_sweep(config, args.conn, log=log)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    text = format_sweep(rows)
    try:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from None
    return 0


# -- parser -----------------------------------------------------------------------


def _conn(value: str) -> Connectivity:
    try:
        return Connectivity.parse(value)
    except (ValueError, KeyError):
        raise argparse.ArgumentTypeError("connectivity must be 6 or 26") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="softseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--conn", type=_conn, default=Connectivity.FACE6, help="6 or 26 (default 6)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--conn", type=_conn, default=argparse.SUPPRESS, help="6 or 26")
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=int, nargs=3, default=(32, 32, 32), metavar=("NX", "NY", "NZ"))
    p.add_argument("--lesion-count", type=int, default=3)
    p.add_argument("--radius-min", type=float, default=2.0)
    p.add_argument("--radius-max", type=float, default=5.0)
    p.add_argument("--base-intensity", type=float, default=100.0)
    p.add_argument("--contrast", type=float, default=80.0)
    p.add_argument("--noise-sigma", type=float, default=5.0)
    p.add_argument("--rater2-erosion", type=int, default=1)

    p = command("build-softmask", cmd_build_softmask, "build T + gamma*D from a mask and FLAIR volume")
    p.add_argument("--mask", required=True)
    p.add_argument("--flair", required=True)
    p.add_argument("--target-size", type=int, default=120, help="percent of the original size")
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--flair-percentile", type=float, default=DEFAULT_FLAIR_PERCENTILE)
    p.add_argument("--out", required=True)
    p.add_argument("--dilated-out", help="also write the soft-labelled region D as a mask")

    p = command("eval", cmd_eval, "score a probability map against a mask")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-component", type=int, default=1)
    p.add_argument("--soft", action="store_true", help="report the soft Dice loss")
    p.add_argument("--dilated")
    p.add_argument("--gamma", type=float)
    p.add_argument("--case-id", default="case")

    p = command("sweep", cmd_sweep, "train and score over a target-size x gamma grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--holdout", action="store_true", help="train on even seeds, test on odd seeds")
    p.add_argument("-v", "--verbose", action="store_true")

    p = command("train", cmd_train, "train the toy segmenter on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=[m.value for m in LossMode], default="binary")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--init", type=float, nargs=4, metavar="W")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--target-size", type=int, default=120)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--flair-percentile", type=float, default=DEFAULT_FLAIR_PERCENTILE)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--history", help="write per-iteration loss as CSV")

    p = command("postprocess", cmd_postprocess, "threshold a probability map and drop small components")
    p.add_argument("--prob", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-component", type=int, default=DEFAULT_MIN_COMPONENT)
    p.add_argument("--out", required=True)

    p = command("metrics", cmd_metrics, "Dice / precision / recall of two masks")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--case-id", default="case")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, DataError) as exc:
        print(exc, file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
