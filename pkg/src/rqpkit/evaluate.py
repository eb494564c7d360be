"""End-to-end pipeline: label fitting, training runs, error reports, curve dumps.

Accuracy is scored per (frame, label QP) pair: the model coefficients are
predicted from the frame's features, the rate at the label QP is solved
from the model, and the signed percentage error against the measured rate
is thresholded.  The one-pass anchor QP is excluded (its rate is known,
not predicted), and quadratic inversions with no real root count as
misses beyond every threshold rather than being dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import CHANNEL_ORDER, GrayFrame, stack_from_coding
from .ingest import CodingMetadata, DatasetSplit
from .model import (
    ModelParams,
    ModelSpec,
    NoRealRootError,
    fit,
    predict_rate,
    relative_error,
)
from .regressor import (
    Network,
    TrainConfig,
    TrainResult,
    default_config,
    mean_predictor_mse,
    predict_params,
    train,
)

DEFAULT_THRESHOLDS = (30.0, 20.0, 10.0)

_QP_MATCH_TOL = 1e-9


def frame_spec(form: str, fastened: bool, md: CodingMetadata) -> ModelSpec:
    """ModelSpec for one frame; fastened specs pin the frame's own anchor."""
    return ModelSpec(form, fastened, md.anchor if fastened else None)


def make_labels(md: CodingMetadata, spec: ModelSpec) -> ModelParams:
    """Ground-truth coefficients: least-squares fit of the frame's label curve.

    Fastened specs are re-anchored to the frame's own operating point, so
    one spec can label a whole corpus.
    """
    if md.labels is None:
        raise ValueError(f"frame {md.frame_id} carries no label curve")
    bound = frame_spec(spec.form, spec.fastened, md)
    if len(md.labels) < bound.param_count:
        raise ValueError(
            f"frame {md.frame_id}: {bound.label()} needs {bound.param_count} label points, "
            f"got {len(md.labels)}"
        )
    return fit(bound, md.labels)


@dataclass(frozen=True)
class PairOutcome:
    """One scored (frame, label QP) pair; predicted/delta are None on inversion failure."""

    frame_id: str
    qp: float
    actual: float
    predicted: float | None
    delta: float | None


@dataclass(frozen=True)
class ReportRow:
    model: str
    fastened: bool
    features: str
    n_pairs: int
    n_failures: int
    mean_abs_delta: float
    proportions: tuple[float, ...]  # aligned with the report thresholds


@dataclass
class ErrorReport:
    thresholds: tuple[float, ...]
    rows: list[ReportRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        header = ["model", "fastened", "features", "n_pairs", "n_failures", "mean_abs_delta_pct"]
        header += [f"prop_le_{t:g}pct" for t in self.thresholds]
        lines = [",".join(header)]
        for r in self.rows:
            cells = [
                r.model,
                "yes" if r.fastened else "no",
                r.features,
                str(r.n_pairs),
                str(r.n_failures),
                f"{r.mean_abs_delta:.6f}",
            ]
            cells += [f"{p:.6f}" for p in r.proportions]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        """Aligned text table with percentage cells, two decimals."""
        head = ["model", "P0", "features", "pairs", "fail", "mean|d|"]
        head += [f"<={t:g}%" for t in self.thresholds]
        body = []
        for r in self.rows:
            body.append(
                [
                    r.model,
                    "x" if r.fastened else "-",
                    r.features,
                    str(r.n_pairs),
                    str(r.n_failures),
                    f"{r.mean_abs_delta:.2f}%",
                ]
                + [f"{100.0 * p:.2f}%" for p in r.proportions]
            )
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        render = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        lines = [render(head), render(["-" * w for w in widths])]
        lines += [render(row) for row in body]
        if self.metadata:
            lines.append("")
            lines += [f"# {k}: {v}" for k, v in sorted(self.metadata.items())]
        return "\n".join(lines) + "\n"


def details_to_csv(details: list[PairOutcome]) -> str:
    """Per-pair outcomes with signed deltas, for diagnostics."""
    lines = ["frame_id,qp,actual_bits,predicted_bits,delta_pct"]
    for d in details:
        predicted = "" if d.predicted is None else f"{d.predicted:.6f}"
        delta = "" if d.delta is None else f"{d.delta:.6f}"
        lines.append(f"{d.frame_id},{d.qp:g},{d.actual:.6f},{predicted},{delta}")
    return "\n".join(lines) + "\n"


def evaluate_frames(items, params_fn, thresholds=DEFAULT_THRESHOLDS, *,
                    model: str, fastened: bool, features: str) -> tuple[ReportRow, list[PairOutcome]]:
    """Score a predictor over every (frame, label QP != anchor QP) pair.

    params_fn(frame, md) supplies the model coefficients for one frame;
    inversion failures count toward n_pairs but meet no threshold.
    """
    thresholds = tuple(float(t) for t in thresholds)
    details: list[PairOutcome] = []
    abs_deltas: list[float] = []
    n_failures = 0
    for frame, md in items:
        if md.labels is None:
            raise ValueError(f"frame {md.frame_id} carries no label curve to score against")
        params = params_fn(frame, md)
        for sample in md.labels.samples:
            if abs(sample.qp - md.anchor.qp0) <= _QP_MATCH_TOL:
                continue  # the one-pass point is measured, never predicted
            try:
                predicted = predict_rate(params, sample.qp)
                delta = relative_error(sample.rate, predicted)
            except NoRealRootError:
                n_failures += 1
                details.append(PairOutcome(md.frame_id, sample.qp, sample.rate, None, None))
                continue
            abs_deltas.append(abs(delta))
            details.append(PairOutcome(md.frame_id, sample.qp, sample.rate, predicted, delta))
    n_pairs = len(details)
    if n_pairs == 0:
        raise ValueError("no scoreable (frame, qp) pairs")
    proportions = tuple(
        sum(1 for d in abs_deltas if d <= t) / n_pairs for t in thresholds
    )
    mean_abs = float(np.mean(abs_deltas)) if abs_deltas else float("nan")
    row = ReportRow(
        model=model,
        fastened=fastened,
        features=features,
        n_pairs=n_pairs,
        n_failures=n_failures,
        mean_abs_delta=mean_abs,
        proportions=proportions,
    )
    return row, details


def label_fit_predictor(form: str, fastened: bool):
    """Oracle predictor: the least-squares fit of each frame's own labels."""

    def params_fn(frame: GrayFrame, md: CodingMetadata) -> ModelParams:
        return make_labels(md, frame_spec(form, fastened, md))

    return params_fn


def net_predictor(network: Network, scaler, form: str, fastened: bool, channels):
    """Predictor backed by a trained network over the given feature channels."""
    channels = tuple(channels)

    def params_fn(frame: GrayFrame, md: CodingMetadata) -> ModelParams:
        stack = stack_from_coding(frame, md.cus, md.pus, channels)
        return predict_params(network, scaler, stack, frame_spec(form, fastened, md))

    return params_fn


# ---------------------------------------------------------------------------
# Training runs and ablation grids
# ---------------------------------------------------------------------------


@dataclass
class TrainedRun:
    form: str
    fastened: bool
    channels: tuple[str, ...]
    network: Network
    result: TrainResult
    baseline_val_mse: float | None
    test_ids: tuple[str, ...]

    @property
    def scaler(self):
        return self.result.scaler

    def predictor(self):
        return net_predictor(self.network, self.scaler, self.form, self.fastened, self.channels)


def corpus_index(corpus) -> dict[str, tuple[GrayFrame, CodingMetadata]]:
    index = {md.frame_id: (frame, md) for frame, md in corpus}
    if len(index) != len(corpus):
        raise ValueError("corpus contains duplicate frame ids")
    return index


def _labelled_items(by_id, ids, form, fastened, channels):
    items = []
    for frame_id in ids:
        frame, md = by_id[frame_id]
        stack = stack_from_coding(frame, md.cus, md.pus, channels)
        items.append((stack, make_labels(md, frame_spec(form, fastened, md))))
    return items


def run_training(corpus, split: DatasetSplit, form: str, fastened: bool, channels,
                 train_cfg: TrainConfig) -> TrainedRun:
    """Fit labels, build stacks, and train one network for one configuration."""
    channels = tuple(c for c in CHANNEL_ORDER if c in tuple(channels))
    if not channels:
        raise ValueError("at least one feature channel is required")
    if not split.train:
        raise ValueError("split has no training frames")
    by_id = corpus_index(corpus)
    sample_md = by_id[split.train[0]][1]
    if sample_md.width != sample_md.height:
        raise ValueError("the regressor expects square frames")
    n_outputs = ModelSpec(form).param_count - (1 if fastened else 0)
    config = default_config(
        input_channels=len(channels),
        input_size=sample_md.width,
        outputs=n_outputs,
        seed=train_cfg.seed,
    )
    network = Network(config)
    train_items = _labelled_items(by_id, split.train, form, fastened, channels)
    val_items = _labelled_items(by_id, split.validation, form, fastened, channels)
    result = train(network, train_items, train_cfg, val_items or None)
    baseline = mean_predictor_mse(result.scaler, val_items) if val_items else None
    return TrainedRun(
        form=form,
        fastened=fastened,
        channels=channels,
        network=network,
        result=result,
        baseline_val_mse=baseline,
        test_ids=tuple(split.test),
    )


def evaluate_run(corpus, run: TrainedRun, thresholds=DEFAULT_THRESHOLDS,
                 ids=None) -> tuple[ReportRow, list[PairOutcome]]:
    """Score a trained run on its test frames (or an explicit id list)."""
    by_id = corpus_index(corpus)
    ids = tuple(ids) if ids is not None else run.test_ids
    if not ids:
        raise ValueError("no frames to evaluate")
    items = [by_id[i] for i in ids]
    return evaluate_frames(
        items,
        run.predictor(),
        thresholds,
        model=run.form,
        fastened=run.fastened,
        features="+".join(run.channels),
    )


@dataclass(frozen=True)
class AblationConfig:
    """Grid of model forms x feature subsets to train and score."""

    forms: tuple[tuple[str, bool], ...] = (("quadratic", True), ("quadratic", False))
    feature_sets: tuple[tuple[str, ...], ...] = (("rec",), CHANNEL_ORDER)
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if not self.forms or not self.feature_sets or not self.thresholds:
            raise ValueError("forms, feature_sets, and thresholds must be nonempty")
        for form, _ in self.forms:
            ModelSpec(form)  # validates the name
        for channels in self.feature_sets:
            if not channels or any(c not in CHANNEL_ORDER for c in channels):
                raise ValueError(f"bad feature subset {channels}")


def run_ablation(corpus, split: DatasetSplit, ablation: AblationConfig,
                 train_cfg: TrainConfig) -> tuple[ErrorReport, dict]:
    """Train and score every (form, features) cell; rows in grid order."""
    report = ErrorReport(
        thresholds=tuple(float(t) for t in ablation.thresholds),
        metadata={
            "aggregation": "per (frame, label-qp) pair, anchor qp excluded",
            "train_frames": len(split.train),
            "validation_frames": len(split.validation),
            "test_frames": len(split.test),
            "epochs": train_cfg.epochs,
            "seed": train_cfg.seed,
        },
    )
    runs: dict[tuple, TrainedRun] = {}
    for form, fastened in ablation.forms:
        for channels in ablation.feature_sets:
            run = run_training(corpus, split, form, fastened, channels, train_cfg)
            row, _ = evaluate_run(corpus, run, ablation.thresholds)
            report.rows.append(row)
            runs[(form, fastened, run.channels)] = run
    return report, runs


def curve_dump(frame: GrayFrame, md: CodingMetadata, predictors: dict, qp_grid=None) -> str:
    """CSV of actual vs predicted rates for one frame, one column per predictor.

    Predictors map a column name to a params_fn(frame, md); inversion
    failures leave the cell empty.
    """
    if not predictors:
        raise ValueError("at least one predictor is required")
    if md.labels is None:
        raise ValueError(f"frame {md.frame_id} carries no label curve")
    qps = [s.qp for s in md.labels.samples] if qp_grid is None else [float(q) for q in qp_grid]
    params_by_name = {name: fn(frame, md) for name, fn in predictors.items()}
    lines = ["qp,actual_bits," + ",".join(f"predicted_bits_{n}" for n in predictors)]
    for qp in qps:
        try:
            actual = f"{md.labels.rate_at(qp):.6f}"
        except KeyError:
            actual = ""
        cells = [f"{qp:g}", actual]
        for name in predictors:
            try:
                cells.append(f"{predict_rate(params_by_name[name], qp):.6f}")
            except NoRealRootError:
                cells.append("")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
