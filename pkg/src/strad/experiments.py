"""Experiment pipelines behind the CLI: data materialization, train/score/eval,
loss comparisons, and ablations over the objective's component subsets.

Every output file embeds the resolved-config hash and the seed on a leading
'#' comment line; CSV numbers are written with 17 significant digits so runs
are reproducible byte for byte and parse back exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .detector import (
    ScoreSeries,
    TrainResult,
    score,
    threshold_best_f1,
    threshold_quantile,
    train,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    MissingColumnError,
    NonBinaryLabelError,
)
from .losses import LossWeights
from .metrics import (
    EvalReport,
    SubdatasetResult,
    air,
    avg_improved,
    entire_f1,
    pa_counts,
    rpa_counts,
)
from .model import default_layer_sizes, init_model, load_checkpoint, save_checkpoint
from .series import (
    Segment,
    TimeSeries,
    apply_normalization,
    fit_normalization,
    load_csv,
    segments_from_labels,
    sliding_windows,
)
from .synth import AnomalySpec, ChannelSpec, GeneratorConfig, make_benchmark


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def provenance(cfg: ExperimentConfig, **extra) -> str:
    parts = [f"config={cfg.hash}", f"seed={cfg.seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def materialize_dataset(cfg: ExperimentConfig, index: int) -> tuple[TimeSeries, TimeSeries]:
    """Build (train, test) series for one configured dataset."""
    ds = cfg.datasets[index]
    if ds.source == "csv":
        train_ts = load_csv(ds.csv.train_path, ds.csv.value_columns, ds.csv.label_column,
                            name=f"{ds.name}_train")
        test_ts = load_csv(ds.csv.test_path, ds.csv.value_columns, ds.csv.label_column,
                           name=f"{ds.name}_test")
        return train_ts, test_ts
    # spaced by 10 so the +1 test-split offset never collides across datasets
    seed = ds.synth.seed if ds.synth.seed is not None else cfg.seed * 1000 + 10 * index
    gen = GeneratorConfig(
        length=ds.synth.length,
        channels=tuple(ChannelSpec(**ch) for ch in ds.synth.channels),
        noise_sigma=ds.synth.noise_sigma,
        seed=seed,
        name=ds.name,
    )
    specs = [AnomalySpec(**spec) for spec in ds.synth.anomalies]
    return make_benchmark(gen, specs, ds.synth.train_fraction)


def resolve_score_mode(configured: str, loss_kind: str) -> str:
    """"auto" pairs each objective with its own discrepancy measure."""
    if configured != "auto":
        return configured
    return "shape_only" if loss_kind == "mse" else "strad_broadcast"


# ---------------------------------------------------------------------------
# one (dataset, loss) pipeline
# ---------------------------------------------------------------------------


@dataclass
class ArmResult:
    """Outcome of training and evaluating one objective on one dataset."""

    arm: str
    dataset: str
    segment_count: int
    f1: dict  # metric -> F1
    thresholds: dict  # metric -> threshold
    train_result: TrainResult
    test_scores: ScoreSeries


def run_arm(
    cfg: ExperimentConfig,
    dataset_index: int,
    loss_kind: str,
    weights: Optional[LossWeights] = None,
    arm_label: Optional[str] = None,
    data: Optional[tuple[TimeSeries, TimeSeries]] = None,
) -> ArmResult:
    """Train one model and evaluate it with the configured thresholding."""
    ds = cfg.datasets[dataset_index]
    weights = weights or cfg.loss_weights
    train_raw, test_raw = data if data is not None else materialize_dataset(cfg, dataset_index)
    stats = fit_normalization(train_raw)
    train_norm = apply_normalization(train_raw, stats)
    test_norm = apply_normalization(test_raw, stats)

    t = cfg.window_length
    windows = sliding_windows(train_norm, t, cfg.train_stride)
    model = init_model(default_layer_sizes(t * train_norm.channels, cfg.model_hidden),
                       seed=cfg.seed)
    result = train(model, windows, cfg.train_config(loss_kind=loss_kind, weights=weights))

    mode = resolve_score_mode(cfg.score_mode, loss_kind)
    test_scores = score(result.model, test_norm, t, cfg.score_stride, weights, mode)
    labels = test_raw.labels
    segments = segments_from_labels(labels) if labels is not None else []

    thresholds: dict = {}
    f1s: dict = {}
    if cfg.threshold_mode == "quantile":
        train_scores = score(result.model, train_norm, t, cfg.score_stride, weights, mode)
        threshold = threshold_quantile(train_scores, cfg.threshold_q)
        for metric in cfg.eval_metrics:
            thresholds[metric] = threshold
    else:
        if labels is None:
            raise DataError(f"dataset {ds.name}: best_f1 thresholding requires test labels")
        for metric in cfg.eval_metrics:
            thresholds[metric], _ = threshold_best_f1(test_scores, labels, metric)
    if labels is None:
        raise DataError(f"dataset {ds.name}: evaluation requires test labels")
    for metric in cfg.eval_metrics:
        preds = (test_scores.scores >= thresholds[metric]).astype(np.int64)
        counts = rpa_counts(preds, segments) if metric == "rpa" else pa_counts(preds, labels)
        f1s[metric] = counts.f1
    return ArmResult(
        arm=arm_label or loss_kind,
        dataset=ds.name,
        segment_count=len(segments),
        f1=f1s,
        thresholds=thresholds,
        train_result=result,
        test_scores=test_scores,
    )


# ---------------------------------------------------------------------------
# file writers
# ---------------------------------------------------------------------------


def write_series_csv(ts: TimeSeries, path, prov: str) -> None:
    lines = [prov]
    header = [f"v{c}" for c in range(ts.channels)]
    if ts.labels is not None:
        header.append("label")
    lines.append(",".join(header))
    for i in range(ts.length):
        row = [_fmt(v) for v in ts.values[i]]
        if ts.labels is not None:
            row.append(str(int(ts.labels[i])))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_scores_csv(scores: ScoreSeries, path, prov: str) -> None:
    lines = [prov, "index,score"]
    lines.extend(f"{i},{_fmt(s)}" for i, s in enumerate(scores.scores))
    Path(path).write_text("\n".join(lines) + "\n")


def read_scores_csv(path) -> np.ndarray:
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != "index,score":
        raise DataError(f"{path}: not a score file")
    return np.array([float(l.split(",")[1]) for l in lines[1:]])


def read_labels_csv(path, label_column: str = "label") -> np.ndarray:
    """Just the 0/1 label column of a labeled series CSV."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: no header row")
    header = rows[0]
    if label_column not in header:
        raise MissingColumnError(f"{path}: column {label_column!r} not in header {header}")
    idx = header.index(label_column)
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        cell = row[idx].strip()
        if cell not in ("0", "1"):
            raise NonBinaryLabelError(f"{path}: row {i}: label {cell!r} is not 0/1")
        labels[i] = int(cell)
    return labels


def write_segments_csv(segments: Sequence[Segment], path, prov: str) -> None:
    lines = [prov, "start,end"]
    lines.extend(f"{s.start},{s.end}" for s in segments)
    Path(path).write_text("\n".join(lines) + "\n")


def write_history_csv(result: TrainResult, path, prov: str) -> None:
    with_components = result.history and result.history[0].trend is not None
    lines = [prov]
    if with_components:
        lines.append("epoch,total,trend,seasonality,shape")
        for i, e in enumerate(result.history):
            lines.append(f"{i},{_fmt(e.total)},{_fmt(e.trend)},{_fmt(e.seasonality)},{_fmt(e.shape)}")
    else:
        lines.append("epoch,total")
        for i, e in enumerate(result.history):
            lines.append(f"{i},{_fmt(e.total)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_table(rows: list[dict], columns: list[str], csv_path, txt_path, prov: str) -> None:
    """One table as full-precision CSV plus an aligned plain-text rendering."""
    csv_lines = [prov, ",".join(columns)]
    for row in rows:
        csv_lines.append(",".join(_cell(row.get(c, "")) for c in columns))
    Path(csv_path).write_text("\n".join(csv_lines) + "\n")

    display = [[_pretty(row.get(c, "")) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in display)) if display else len(c)
              for i, c in enumerate(columns)]
    txt_lines = [prov, "  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    for r in display:
        txt_lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    Path(txt_path).write_text("\n".join(txt_lines) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def _pretty(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_synth(cfg: ExperimentConfig, outdir: Path) -> list[Path]:
    """Write train/test CSVs per synthetic dataset plus one manifest."""
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    manifest = {"config_hash": cfg.hash, "seed": cfg.seed, "datasets": []}
    indices = [i for i, d in enumerate(cfg.datasets) if d.source == "synth"]
    if not indices:
        raise ConfigError("cmd synth needs at least one dataset with source 'synth'")
    for i in indices:
        ds = cfg.datasets[i]
        train_ts, test_ts = materialize_dataset(cfg, i)
        train_path = outdir / f"{ds.name}_train.csv"
        test_path = outdir / f"{ds.name}_test.csv"
        write_series_csv(train_ts, train_path, provenance(cfg, dataset=ds.name, split="train"))
        write_series_csv(test_ts, test_path, provenance(cfg, dataset=ds.name, split="test"))
        written += [train_path, test_path]
        resolved_seed = ds.synth.seed if ds.synth.seed is not None else cfg.seed * 1000 + i
        manifest["datasets"].append({
            "name": ds.name,
            "seed": resolved_seed,
            "length": ds.synth.length,
            "noise_sigma": ds.synth.noise_sigma,
            "train_fraction": ds.synth.train_fraction,
            "channels": list(ds.synth.channels),
            "anomalies": list(ds.synth.anomalies),
            "train_csv": train_path.name,
            "test_csv": test_path.name,
        })
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written + [manifest_path]


def run_train_cmd(cfg: ExperimentConfig, outdir: Path) -> tuple[Path, Path]:
    """Train on the first configured dataset; emit checkpoint and history."""
    outdir.mkdir(parents=True, exist_ok=True)
    ds = cfg.datasets[0]
    train_raw, _ = materialize_dataset(cfg, 0)
    stats = fit_normalization(train_raw)
    train_norm = apply_normalization(train_raw, stats)
    t = cfg.window_length
    windows = sliding_windows(train_norm, t, cfg.train_stride)
    model = init_model(default_layer_sizes(t * train_norm.channels, cfg.model_hidden),
                       seed=cfg.seed)
    result = train(model, windows, cfg.train_config())
    ckpt_path = outdir / f"{ds.name}_model.ckpt"
    save_checkpoint(result.model, ckpt_path, meta={"config": cfg.hash, "seed": str(cfg.seed)})
    hist_path = outdir / f"{ds.name}_history.csv"
    write_history_csv(result, hist_path, provenance(cfg, dataset=ds.name, loss=cfg.train_loss))
    return ckpt_path, hist_path


def run_detect_cmd(cfg: ExperimentConfig, checkpoint: Path, outdir: Path) -> dict:
    """Score the first dataset's test split and threshold it."""
    outdir.mkdir(parents=True, exist_ok=True)
    ds = cfg.datasets[0]
    model, _ = load_checkpoint(checkpoint)
    train_raw, test_raw = materialize_dataset(cfg, 0)
    t = cfg.window_length
    if model.input_size != t * train_raw.channels:
        raise CheckpointError(
            f"checkpoint expects input size {model.input_size}, "
            f"configuration implies {t * train_raw.channels}"
        )
    stats = fit_normalization(train_raw)
    train_norm = apply_normalization(train_raw, stats)
    test_norm = apply_normalization(test_raw, stats)
    mode = resolve_score_mode(cfg.score_mode, cfg.train_loss)
    test_scores = score(model, test_norm, t, cfg.score_stride, cfg.loss_weights, mode)
    if cfg.threshold_mode == "quantile":
        train_scores = score(model, train_norm, t, cfg.score_stride, cfg.loss_weights, mode)
        threshold = threshold_quantile(train_scores, cfg.threshold_q)
    else:
        if test_raw.labels is None:
            raise DataError("best_f1 thresholding requires test labels")
        threshold, _ = threshold_best_f1(test_scores, test_raw.labels, cfg.threshold_metric)
    preds = (test_scores.scores >= threshold).astype(np.int64)
    predicted_segments = segments_from_labels(preds)

    scores_path = outdir / f"{ds.name}_scores.csv"
    write_scores_csv(test_scores, scores_path, provenance(cfg, dataset=ds.name, mode=mode))
    segments_path = outdir / f"{ds.name}_segments.csv"
    write_segments_csv(predicted_segments, segments_path,
                       provenance(cfg, dataset=ds.name, threshold=_fmt(threshold)))
    summary = {
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "dataset": ds.name,
        "mode": mode,
        "threshold_mode": cfg.threshold_mode,
        "threshold": threshold,
        "scores_csv": scores_path.name,
        "segments_csv": segments_path.name,
    }
    (outdir / f"{ds.name}_detect.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def run_eval_cmd(
    pairs: list[tuple[Path, Path]],
    metrics: Sequence[str],
    outdir: Path,
    label_column: str = "label",
    thresholds: Optional[list[float]] = None,
    prov: str = "# config=adhoc seed=0",
) -> EvalReport:
    """Per-sub-dataset F1s plus the segment-weighted entire-dataset F1s.

    With explicit `thresholds` (one per pair, or a single broadcast value)
    each metric is evaluated at that fixed threshold; otherwise a best-F1
    sweep runs per metric.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    if thresholds is not None and len(thresholds) == 1:
        thresholds = thresholds * len(pairs)
    if thresholds is not None and len(thresholds) != len(pairs):
        raise ConfigError("need one threshold per scores/data pair (or a single value)")
    rows = []
    for i, (scores_path, data_path) in enumerate(pairs):
        scores = read_scores_csv(scores_path)
        labels = read_labels_csv(data_path, label_column)
        if labels.shape[0] != scores.shape[0]:
            raise DataError(f"{data_path}: labels misaligned with {scores_path}")
        score_series = ScoreSeries(scores=scores, coverage=np.ones(len(scores), dtype=np.int64))
        segments = segments_from_labels(labels)
        fields = {"name": Path(data_path).stem, "segment_count": len(segments)}
        for metric in metrics:
            if thresholds is None:
                threshold, f1 = threshold_best_f1(score_series, labels, metric)
            else:
                threshold = thresholds[i]
                preds = (scores >= threshold).astype(np.int64)
                counts = rpa_counts(preds, segments) if metric == "rpa" else pa_counts(preds, labels)
                f1 = counts.f1
            fields[f"{metric}_f1"] = f1
            fields[f"threshold_{metric}"] = threshold
        rows.append(SubdatasetResult(**fields))
    entire = {
        f"entire_{metric}_f1": entire_f1(
            [(r.segment_count, getattr(r, f"{metric}_f1")) for r in rows])
        for metric in metrics
    }
    report = EvalReport(rows=tuple(rows), **entire)

    table = []
    for r in report.rows:
        row = {"name": r.name, "segments": r.segment_count}
        for metric in metrics:
            row[f"{metric}_f1"] = getattr(r, f"{metric}_f1")
            row[f"{metric}_threshold"] = getattr(r, f"threshold_{metric}")
        table.append(row)
    entire_row = {"name": "ENTIRE", "segments": sum(r.segment_count for r in report.rows)}
    for metric in metrics:
        entire_row[f"{metric}_f1"] = getattr(report, f"entire_{metric}_f1")
        entire_row[f"{metric}_threshold"] = ""
    table.append(entire_row)
    columns = ["name", "segments"]
    for metric in metrics:
        columns += [f"{metric}_f1", f"{metric}_threshold"]
    write_table(table, columns, outdir / "report.csv", outdir / "report.txt", prov)
    return report


@dataclass
class CompareOutcome:
    per_arm_dataset: list[dict]  # arm, dataset, segments, <metric>_f1...
    summary: list[dict]  # arm, metric, entire_f1, avg_improved, air


def run_compare(cfg: ExperimentConfig, outdir: Optional[Path] = None) -> CompareOutcome:
    """Train one model per (loss arm, dataset) with shared seeds and compare.

    The baseline is the first "mse" arm; Avg.Improved and A.I.R. are computed
    per arm against it from the per-dataset F1 columns.
    """
    arms = list(cfg.compare_losses)
    if len(arms) < 2:
        raise ConfigError("cmd compare needs at least two loss entries")
    if "mse" not in arms:
        raise ConfigError("cmd compare requires 'mse' among the losses (the baseline)")
    labels: list[str] = []
    seen: dict = {}
    for loss in arms:
        seen[loss] = seen.get(loss, 0) + 1
        labels.append(loss if seen[loss] == 1 else f"{loss}#{seen[loss]}")
    baseline_label = labels[arms.index("mse")]

    results: dict = {}
    for i in range(len(cfg.datasets)):
        data = materialize_dataset(cfg, i)
        for loss, label in zip(arms, labels):
            results[(label, i)] = run_arm(cfg, i, loss, arm_label=label, data=data)

    per_arm_dataset = []
    for label in labels:
        for i, ds in enumerate(cfg.datasets):
            r = results[(label, i)]
            row = {"arm": label, "dataset": ds.name, "segments": r.segment_count}
            for metric in cfg.eval_metrics:
                row[f"{metric}_f1"] = r.f1[metric]
                row[f"{metric}_threshold"] = r.thresholds[metric]
            per_arm_dataset.append(row)

    summary = []
    for label in labels:
        for metric in cfg.eval_metrics:
            f1s = [results[(label, i)].f1[metric] for i in range(len(cfg.datasets))]
            base = [results[(baseline_label, i)].f1[metric] for i in range(len(cfg.datasets))]
            weighted = entire_f1([(results[(label, i)].segment_count, f1s[i])
                                  for i in range(len(cfg.datasets))])
            row = {"arm": label, "metric": metric, "entire_f1": weighted}
            if label == baseline_label:
                row["avg_improved"] = ""
                row["air"] = ""
            else:
                row["avg_improved"] = avg_improved(f1s, base)
                row["air"] = air(f1s, base)
            summary.append(row)

    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        columns = ["arm", "dataset", "segments"]
        for metric in cfg.eval_metrics:
            columns += [f"{metric}_f1", f"{metric}_threshold"]
        write_table(per_arm_dataset, columns, outdir / "comparison.csv",
                    outdir / "comparison.txt", provenance(cfg))
        write_table(summary, ["arm", "metric", "entire_f1", "avg_improved", "air"],
                    outdir / "improvement.csv", outdir / "improvement.txt", provenance(cfg))
    return CompareOutcome(per_arm_dataset=per_arm_dataset, summary=summary)


ABLATION_SUBSETS = (
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, 0, 1), (0, 1, 1),
    (1, 1, 1),
)


def run_ablate(cfg: ExperimentConfig, outdir: Optional[Path] = None) -> list[dict]:
    """Evaluate the 7 non-empty component subsets by zeroing excluded weights."""
    base = cfg.loss_weights
    rows = []
    data = [materialize_dataset(cfg, i) for i in range(len(cfg.datasets))]
    for use_trend, use_sea, use_shape in ABLATION_SUBSETS:
        weights = LossWeights(
            lambda1=base.lambda1 if use_trend else 0.0,
            lambda2=base.lambda2 if use_sea else 0.0,
            lambda3=base.lambda3 if use_shape else 0.0,
            epsilon=base.epsilon,
            trend_variant=base.trend_variant,
        )
        row = {"trend": use_trend, "seasonality": use_sea, "shape": use_shape}
        arm_results = []
        for i, ds in enumerate(cfg.datasets):
            r = run_arm(cfg, i, "strad", weights=weights, data=data[i])
            arm_results.append(r)
            for metric in cfg.eval_metrics:
                row[f"{metric}_f1_{ds.name}"] = r.f1[metric]
        for metric in cfg.eval_metrics:
            row[f"entire_{metric}_f1"] = entire_f1(
                [(r.segment_count, r.f1[metric]) for r in arm_results])
        rows.append(row)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        columns = ["trend", "seasonality", "shape"]
        columns += [f"entire_{m}_f1" for m in cfg.eval_metrics]
        for ds in cfg.datasets:
            columns += [f"{m}_f1_{ds.name}" for m in cfg.eval_metrics]
        write_table(rows, columns, outdir / "ablation.csv", outdir / "ablation.txt",
                    provenance(cfg))
    return rows
