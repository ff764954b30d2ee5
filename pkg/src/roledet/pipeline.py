"""Configuration-driven orchestration of the full role-detection pipeline.

run() executes ingest -> transform -> subsample -> embed -> fuse ->
stratified CV with per-fold oversampling -> train -> evaluate, and returns a
report bundle whose metric payload is byte-reproducible for a fixed
(config, seed). Wall-clock timings live only in the run manifest.
"""

from __future__ import annotations

import csv
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    ClassStats,
    ContextTargetSample,
    Role,
    class_stats,
    parse_corpus,
    subsample_class,
    to_context_target,
)
from .embedding import (
    EmbeddingTable,
    FusionConfig,
    baseline_table,
    fuse,
    load_embedding_table,
    tokenize_baseline,
)
from .errors import ConfigError, DataError, PipelineError, RoledetError
from .evaluation import (
    MetricsReport,
    Prediction,
    ThresholdPolicy,
    calibrate_threshold,
    ecdf,
    evaluate_predictions,
    make_predictions,
    stratified_kfold,
)
from .neural import SnapshotEnsemble, TrainConfig, ensemble_predict, forward, init_mlp, train
from .oversample import AdasynConfig, SyntheticBatch, adasyn
from .seeds import derive_seed
from .trees import (
    AdaBoostConfig,
    ForestConfig,
    GbtConfig,
    predict_adaboost,
    predict_forest,
    predict_gbt,
    train_adaboost,
    train_forest,
    train_gbt,
)

MODEL_KINDS = ("mlp", "snapshot-ensemble", "forest", "adaboost", "gbt")


@dataclass
class PipelineConfig:
    dataset: str
    seed: int = 0
    output_dir: str | None = None
    bystander_other_cap: int | None = 5000
    cap_unit: str = "samples"
    context_weight: float = 0.5
    embedding_provider: str = "baseline"
    embedding_dim: int = 256
    embedding_path: str | None = None
    adasyn_enabled: bool = True
    adasyn_k: int = 15
    adasyn_beta: float = 1.0
    adasyn_scope: str = "per-fold"
    model_kind: str = "mlp"
    model_params: dict = field(default_factory=dict)
    folds: int = 10
    threshold_class: int = 1
    threshold_percentile: float = 25.0

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "dataset" not in raw:
            raise ConfigError("config missing required key 'dataset'")
        fusion = raw.get("fusion", {})
        embedding = raw.get("embedding", {})
        ad = raw.get("adasyn", {})
        model = dict(raw.get("model", {}))
        ev = raw.get("eval", {})
        kind = model.pop("kind", "mlp")
        cfg = cls(
            dataset=raw["dataset"],
            seed=int(raw.get("seed", 0)),
            output_dir=raw.get("output_dir"),
            bystander_other_cap=raw.get("bystander_other_cap", 5000),
            cap_unit=raw.get("cap_unit", "samples"),
            context_weight=float(fusion.get("lambda", 0.5)),
            embedding_provider=embedding.get("provider", "baseline"),
            embedding_dim=int(embedding.get("dim", 256)),
            embedding_path=embedding.get("path"),
            adasyn_enabled=bool(ad.get("enabled", True)),
            adasyn_k=int(ad.get("k", 15)),
            adasyn_beta=float(ad.get("beta", 1.0)),
            adasyn_scope=ad.get("scope", "per-fold"),
            model_kind=kind,
            model_params=model,
            folds=int(ev.get("folds", 10)),
            threshold_class=int(ev.get("threshold_class", 1)),
            threshold_percentile=float(ev.get("threshold_percentile", 25)),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.embedding_provider not in ("baseline", "file"):
            raise ConfigError("embedding.provider must be 'baseline' or 'file'")
        if self.embedding_provider == "file" and not self.embedding_path:
            raise ConfigError("embedding.provider 'file' requires embedding.path")
        if self.cap_unit not in ("samples", "pairs"):
            raise ConfigError("cap_unit must be 'samples' or 'pairs'")
        if self.adasyn_scope not in ("per-fold", "global"):
            raise ConfigError("adasyn.scope must be 'per-fold' or 'global'")
        if self.folds < 2:
            raise ConfigError("eval.folds must be >= 2")
        if not 0 <= self.threshold_class <= 4:
            raise ConfigError("eval.threshold_class must be in [0, 4]")
        if not 0 < self.threshold_percentile < 100:
            raise ConfigError("eval.threshold_percentile must be in (0, 100)")
        try:
            self._build_model_config(seed=0)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model parameters: {exc}") from exc

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "bystander_other_cap": self.bystander_other_cap,
            "cap_unit": self.cap_unit,
            "fusion": {"lambda": self.context_weight},
            "embedding": {
                "provider": self.embedding_provider,
                "dim": self.embedding_dim,
                "path": self.embedding_path,
            },
            "adasyn": {
                "enabled": self.adasyn_enabled,
                "k": self.adasyn_k,
                "beta": self.adasyn_beta,
                "scope": self.adasyn_scope,
            },
            "model": {"kind": self.model_kind, **self.model_params},
            "eval": {
                "folds": self.folds,
                "threshold_class": self.threshold_class,
                "threshold_percentile": self.threshold_percentile,
            },
        }

    def _build_model_config(self, seed: int):
        params = dict(self.model_params)
        if self.model_kind in ("mlp", "snapshot-ensemble"):
            params.pop("combine", None)
            if "hidden_sizes" in params:
                params["hidden_sizes"] = tuple(params["hidden_sizes"])
            return _make_config(TrainConfig, params, seed)
        if self.model_kind == "forest":
            return _make_config(ForestConfig, params, seed)
        if self.model_kind == "adaboost":
            return _make_config(AdaBoostConfig, params, seed)
        return _make_config(GbtConfig, params, seed)


def _make_config(cls, params: dict, seed: int):
    known = {f.name for f in fields(cls)}
    unknown = set(params) - known
    if unknown:
        raise ConfigError(
            f"unknown {cls.__name__} parameter(s): {', '.join(sorted(unknown))}"
        )
    return cls(**{**params, "seed": seed})


@dataclass
class DatasetBundle:
    samples: list[ContextTargetSample]
    ids: list[str]
    X: np.ndarray
    y: np.ndarray
    labels_by_id: dict[str, int]
    stats_pre_cap: ClassStats
    stats: ClassStats
    embedding_metadata: str = ""


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except RoledetError as exc:
        raise PipelineError(name, str(exc)) from exc
    except Exception as exc:  # noqa: BLE001 - annotate any stage failure with its stage
        raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc
    finally:
        timings[name] = time.perf_counter() - start


def build_dataset(cfg: PipelineConfig, timings: dict | None = None) -> DatasetBundle:
    """Parse, transform, cap the dominant class, embed, and fuse."""
    timings = timings if timings is not None else {}
    with _stage("parse", timings):
        pairs = parse_corpus(cfg.dataset)
        if not pairs:
            raise DataError(f"corpus {cfg.dataset} is empty")
    with _stage("transform", timings):
        samples_all = to_context_target(pairs)
        stats_pre = class_stats(samples_all, tokenize_baseline)
        if cfg.bystander_other_cap is not None:
            samples = subsample_class(
                samples_all,
                Role.BYSTANDER_OTHER,
                cfg.bystander_other_cap,
                derive_seed(cfg.seed, "subsample"),
                unit=cfg.cap_unit,
            )
        else:
            samples = samples_all
        stats = class_stats(samples, tokenize_baseline)
    with _stage("embed", timings):
        table = _embedding_table(cfg, samples)
        lam = FusionConfig(context_weight=cfg.context_weight)
        X = np.vstack(
            [fuse(table.entries[s.target_id], table.entries[s.context_id], lam) for s in samples]
        )
    ids = [s.sample_id for s in samples]
    y = np.array([s.label for s in samples], dtype=np.int64)
    return DatasetBundle(
        samples=samples,
        ids=ids,
        X=X,
        y=y,
        labels_by_id={sid: int(lbl) for sid, lbl in zip(ids, y)},
        stats_pre_cap=stats_pre,
        stats=stats,
        embedding_metadata=table.metadata,
    )


def _embedding_table(cfg: PipelineConfig, samples) -> EmbeddingTable:
    needed: dict[str, str] = {}
    for s in samples:
        needed[s.target_id] = s.target_text
        needed[s.context_id] = s.context_text
    if cfg.embedding_provider == "baseline":
        return baseline_table(needed, cfg.embedding_dim, seed=derive_seed(cfg.seed, "embed"))
    table = load_embedding_table(cfg.embedding_path)
    missing = sorted(set(needed) - set(table.entries))
    if missing:
        preview = ", ".join(missing[:5])
        raise DataError(
            f"embedding table lacks {len(missing)} comment id(s) required by the corpus "
            f"(e.g. {preview})"
        )
    return table


def _apply_adasyn(cfg: PipelineConfig, X, y, seed: int) -> tuple[np.ndarray, np.ndarray, SyntheticBatch]:
    counts = np.bincount(y, minlength=5)
    singletons = {int(c) for c in np.flatnonzero(counts == 1)}
    return adasyn(
        X, y, AdasynConfig(k=cfg.adasyn_k, beta=cfg.adasyn_beta, seed=seed), exclude=singletons
    )


def _fit_model(cfg: PipelineConfig, X_fit, y_fit, X_val, y_val, seed: int):
    """Train the configured model kind; returns an object predict_probs() accepts."""
    kind = cfg.model_kind
    if kind in ("mlp", "snapshot-ensemble"):
        train_cfg: TrainConfig = cfg._build_model_config(seed)
        head = init_mlp(
            X_fit.shape[1],
            derive_seed(seed, "mlp-init"),
            hidden_sizes=train_cfg.hidden_sizes,
            n_classes=5,
            dropout_rate=train_cfg.dropout_rate,
        )
        best, log, ensemble = train(head, (X_fit, y_fit), (X_val, y_val), train_cfg)
        return best if kind == "mlp" else ensemble
    model_cfg = cfg._build_model_config(seed)
    if kind == "forest":
        return train_forest(X_fit, y_fit, model_cfg, n_classes=5)
    if kind == "adaboost":
        return train_adaboost(X_fit, y_fit, model_cfg, n_classes=5)
    return train_gbt(X_fit, y_fit, model_cfg, n_classes=5)


def predict_probs(model, X: np.ndarray, combine: str = "mean") -> np.ndarray:
    """Probability rows from any trained model artifact."""
    from .neural import MlpHead
    from .trees import AdaBoostModel, ForestModel, GbtModel

    if isinstance(model, MlpHead):
        return forward(model, X)
    if isinstance(model, SnapshotEnsemble):
        return ensemble_predict(model, X, combine=combine)
    if isinstance(model, ForestModel):
        return predict_forest(model, X)[1]
    if isinstance(model, AdaBoostModel):
        return predict_adaboost(model, X)[1]
    if isinstance(model, GbtModel):
        return predict_gbt(model, X)[1]
    raise TypeError(f"cannot predict with {type(model).__name__}")


def stratified_tail_split(y: np.ndarray, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Hold out the final `fraction` of each class's positions for validation."""
    val_mask = np.zeros(len(y), dtype=bool)
    for cls in np.unique(y):
        pos = np.flatnonzero(y == cls)
        n_val = int(np.floor(fraction * len(pos)))
        if n_val > 0:
            val_mask[pos[-n_val:]] = True
    if not val_mask.any():
        val_mask[-1] = True
    if val_mask.all():
        val_mask[0] = False
    return np.flatnonzero(~val_mask), np.flatnonzero(val_mask)


@dataclass
class ReportBundle:
    config_echo: dict
    master_seed: int
    tau: float
    pooled: MetricsReport
    per_fold: list[MetricsReport]
    fold_mean: dict[str, float]
    class_stats_pre_cap: ClassStats
    class_stats: ClassStats
    fold_test_ids: list[list[str]]
    synthetic_added: list[dict]
    ecdf_confidence: np.ndarray
    ecdf_length: np.ndarray
    timings: dict[str, float]

    def metrics_dict(self) -> dict:
        """Deterministic metric payload (no timings, no environment info)."""
        return {
            "config": self.config_echo,
            "seed": self.master_seed,
            "tau": self.tau,
            "rejection_rate": self.pooled.rejection_rate,
            "pooled": self.pooled.as_dict(),
            "per_fold": [r.as_dict() for r in self.per_fold],
            "fold_mean": self.fold_mean,
            "class_stats_pre_cap": self.class_stats_pre_cap.as_dict(),
            "class_stats": self.class_stats.as_dict(),
            "synthetic_added": self.synthetic_added,
        }

    def manifest_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "seed": self.master_seed,
            "version": __version__,
            "numpy_version": np.__version__,
            "timings_seconds": self.timings,
            "fold_sizes": [len(ids) for ids in self.fold_test_ids],
            "fold_test_ids": self.fold_test_ids,
        }


_FOLD_MEAN_FIELDS = (
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "top2_accuracy",
    "top2_f1_weighted",
    "thr_accuracy",
    "thr_precision_weighted",
    "thr_recall_weighted",
    "thr_f1_weighted",
    "rejection_rate",
)


def run(cfg: PipelineConfig, output_dir: str | Path | None = None) -> ReportBundle:
    """Execute the full cross-validated pipeline and (optionally) write the report bundle.

    Oversampling runs inside each training fold by default, so test folds
    never contain synthetic samples; scope "global" instead oversamples once
    before folding, mimicking a pre-split run.
    """
    timings: dict[str, float] = {}
    bundle = build_dataset(cfg, timings)
    X, y, ids = bundle.X, bundle.y, list(bundle.ids)
    labels_by_id = dict(bundle.labels_by_id)

    synthetic_added: list[dict] = []
    if cfg.adasyn_enabled and cfg.adasyn_scope == "global":
        with _stage("oversample", timings):
            X, y, batch = _apply_adasyn(cfg, X, y, derive_seed(cfg.seed, "adasyn-global"))
            for i, label in enumerate(batch.labels.tolist()):
                sid = f"synthetic:{label}:{i}"
                ids.append(sid)
                labels_by_id[sid] = int(label)
            synthetic_added.append(_count_by_label(batch))

    with _stage("folds", timings):
        folds = stratified_kfold(y, cfg.folds, derive_seed(cfg.seed, "folds"))

    predictions: list[Prediction] = []
    fold_slices: list[tuple[int, int]] = []
    fold_test_ids: list[list[str]] = []

    with _stage("train-evaluate", timings):
        for f, test_idx in enumerate(folds):
            train_idx = np.sort(np.concatenate([folds[g] for g in range(len(folds)) if g != f]))
            fold_seed = derive_seed(cfg.seed, "fold", f)
            probs = _run_fold(cfg, X, y, train_idx, test_idx, fold_seed, f, synthetic_added, timings)
            fold_preds = make_predictions([ids[i] for i in test_idx], probs)
            fold_slices.append((len(predictions), len(predictions) + len(fold_preds)))
            predictions.extend(fold_preds)
            fold_test_ids.append([ids[i] for i in test_idx])

    with _stage("report", timings):
        policy = ThresholdPolicy(
            calibration_class=cfg.threshold_class, percentile=cfg.threshold_percentile
        )
        tau = calibrate_threshold(predictions, labels_by_id, policy)
        pooled = evaluate_predictions(predictions, labels_by_id, tau)
        per_fold = [
            evaluate_predictions(predictions[a:b], labels_by_id, tau) for a, b in fold_slices
        ]
        fold_mean = {
            name: float(np.mean([getattr(r, name) for r in per_fold]))
            for name in _FOLD_MEAN_FIELDS
        }
        true = [labels_by_id[p.sample_id] for p in predictions]
        correct_cal = [
            p.top1_confidence
            for p, t in zip(predictions, true)
            if p.top1 == t == cfg.threshold_class
        ]
        lengths = [len(tokenize_baseline(s.target_text)) for s in bundle.samples]
        report = ReportBundle(
            config_echo=cfg.as_dict(),
            master_seed=cfg.seed,
            tau=tau,
            pooled=pooled,
            per_fold=per_fold,
            fold_mean=fold_mean,
            class_stats_pre_cap=bundle.stats_pre_cap,
            class_stats=bundle.stats,
            fold_test_ids=fold_test_ids,
            synthetic_added=synthetic_added,
            ecdf_confidence=ecdf(correct_cal),
            ecdf_length=ecdf(lengths),
            timings=timings,
        )

    if output_dir is not None:
        write_report_bundle(report, output_dir)
    return report


def _run_fold(cfg, X, y, train_idx, test_idx, fold_seed, fold_no, synthetic_added, timings):
    X_train, y_train = X[train_idx], y[train_idx]
    per_fold_adasyn = cfg.adasyn_enabled and cfg.adasyn_scope == "per-fold"

    if cfg.model_kind in ("mlp", "snapshot-ensemble"):
        train_cfg: TrainConfig = cfg._build_model_config(fold_seed)
        fit_rel, val_rel = stratified_tail_split(y_train, train_cfg.val_fraction)
        X_fit, y_fit = X_train[fit_rel], y_train[fit_rel]
        X_val, y_val = X_train[val_rel], y_train[val_rel]
        if per_fold_adasyn:
            X_fit, y_fit, batch = _apply_adasyn(
                cfg, X_fit, y_fit, derive_seed(cfg.seed, "adasyn", fold_no)
            )
            synthetic_added.append({"fold": fold_no, **_count_by_label(batch)})
        model = _fit_model(cfg, X_fit, y_fit, X_val, y_val, fold_seed)
    else:
        if per_fold_adasyn:
            X_train, y_train, batch = _apply_adasyn(
                cfg, X_train, y_train, derive_seed(cfg.seed, "adasyn", fold_no)
            )
            synthetic_added.append({"fold": fold_no, **_count_by_label(batch)})
        model = _fit_model(cfg, X_train, y_train, None, None, fold_seed)

    combine = cfg.model_params.get("combine", "mean")
    return predict_probs(model, X[test_idx], combine=combine)


def _count_by_label(batch: SyntheticBatch) -> dict:
    counts = {}
    for label in batch.labels.tolist():
        counts[str(label)] = counts.get(str(label), 0) + 1
    return {"added": counts, "total": len(batch)}


# ---------------------------------------------------------------------------
# Whole-set train / evaluate (the CLI's train and evaluate subcommands)


def train_full(cfg: PipelineConfig):
    """Train one model on the entire (capped, fused, optionally oversampled) dataset."""
    timings: dict[str, float] = {}
    bundle = build_dataset(cfg, timings)
    X, y = bundle.X, bundle.y
    seed = derive_seed(cfg.seed, "fold", 0)
    with _stage("train", timings):
        if cfg.model_kind in ("mlp", "snapshot-ensemble"):
            train_cfg: TrainConfig = cfg._build_model_config(seed)
            fit_rel, val_rel = stratified_tail_split(y, train_cfg.val_fraction)
            X_fit, y_fit = X[fit_rel], y[fit_rel]
            X_val, y_val = X[val_rel], y[val_rel]
            if cfg.adasyn_enabled:
                X_fit, y_fit, _ = _apply_adasyn(cfg, X_fit, y_fit, derive_seed(cfg.seed, "adasyn", 0))
            model = _fit_model(cfg, X_fit, y_fit, X_val, y_val, seed)
        else:
            if cfg.adasyn_enabled:
                X, y, _ = _apply_adasyn(cfg, X, y, derive_seed(cfg.seed, "adasyn", 0))
            model = _fit_model(cfg, X, y, None, None, seed)
    return model, bundle, timings


def evaluate_model(cfg: PipelineConfig, model, bundle: DatasetBundle | None = None) -> ReportBundle:
    """Score a trained model over the whole configured dataset (no CV)."""
    timings: dict[str, float] = {}
    if bundle is None:
        bundle = build_dataset(cfg, timings)
    with _stage("evaluate", timings):
        combine = cfg.model_params.get("combine", "mean")
        probs = predict_probs(model, bundle.X, combine=combine)
        predictions = make_predictions(bundle.ids, probs)
        policy = ThresholdPolicy(
            calibration_class=cfg.threshold_class, percentile=cfg.threshold_percentile
        )
        tau = calibrate_threshold(predictions, bundle.labels_by_id, policy)
        pooled = evaluate_predictions(predictions, bundle.labels_by_id, tau)
        correct_cal = [
            p.top1_confidence
            for p in predictions
            if p.top1 == bundle.labels_by_id[p.sample_id] == cfg.threshold_class
        ]
        lengths = [len(tokenize_baseline(s.target_text)) for s in bundle.samples]
    return ReportBundle(
        config_echo=cfg.as_dict(),
        master_seed=cfg.seed,
        tau=tau,
        pooled=pooled,
        per_fold=[],
        fold_mean={},
        class_stats_pre_cap=bundle.stats_pre_cap,
        class_stats=bundle.stats,
        fold_test_ids=[],
        synthetic_added=[],
        ecdf_confidence=ecdf(correct_cal),
        ecdf_length=ecdf(lengths),
        timings=timings,
    )


def oversample_preview(cfg: PipelineConfig):
    """Run ADASYN once over the whole dataset and return the audit trail."""
    bundle = build_dataset(cfg)
    X, y, batch = _apply_adasyn(cfg, bundle.X, bundle.y, derive_seed(cfg.seed, "adasyn-global"))
    return bundle, batch


# ---------------------------------------------------------------------------
# Output writing


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_confusion_csv(path: Path, matrix: np.ndarray):
    from .corpus import ROLE_NAMES

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted", *ROLE_NAMES])
        for i, row in enumerate(matrix):
            writer.writerow([ROLE_NAMES[i], *row.tolist()])


def _write_ecdf_csv(path: Path, points: np.ndarray, value_name: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([value_name, "cumulative_fraction"])
        for value, frac in points:
            writer.writerow([value, frac])


def write_report_bundle(bundle: ReportBundle, output_dir: str | Path):
    """Write metrics.json, confusion and ECDF CSVs, and the run manifest."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "metrics.json", bundle.metrics_dict())
    _write_json(out / "manifest.json", bundle.manifest_dict())
    _write_confusion_csv(out / "confusion_pooled.csv", bundle.pooled.confusion)
    _write_confusion_csv(out / "confusion_pooled_thresholded.csv", bundle.pooled.confusion_thresholded)
    for f, report in enumerate(bundle.per_fold):
        _write_confusion_csv(out / f"confusion_fold{f}.csv", report.confusion)
    _write_ecdf_csv(out / "ecdf_confidence.csv", bundle.ecdf_confidence, "confidence")
    _write_ecdf_csv(out / "ecdf_length.csv", bundle.ecdf_length, "token_length")
