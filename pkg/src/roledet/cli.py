"""Command-line interface.

Subcommands: stats, transform, oversample-preview, train, evaluate, run.
Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .corpus import ROLE_NAMES, Role, class_stats, parse_corpus, subsample_class, to_context_target
from .embedding import tokenize_baseline
from .errors import ConfigError, DataError, PipelineError
from .pipeline import (
    PipelineConfig,
    evaluate_model,
    oversample_preview,
    run,
    train_full,
    write_report_bundle,
)
from .seeds import derive_seed
from .serialize import load_model, save_model

log = logging.getLogger("roledet")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _load_config(args) -> PipelineConfig:
    if not args.config:
        raise ConfigError("this subcommand requires --config")
    cfg = PipelineConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output_dir = str(args.output)
    return cfg


def _out_dir(args, cfg: PipelineConfig | None = None) -> Path:
    if args.output is not None:
        return Path(args.output)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    raise ConfigError("no output directory: pass --output or set output_dir in the config")


def _cmd_stats(args) -> int:
    pairs = parse_corpus(args.dataset)
    samples = to_context_target(pairs)
    stats = class_stats(samples, tokenize_baseline)
    print(f"{'class':<22}{'count':>8}{'share':>10}{'median':>9}{'p99':>6}")
    for label, row in sorted(stats.per_class.items()):
        print(
            f"{ROLE_NAMES[label]:<22}{row.count:>8}{row.share:>10.4%}"
            f"{row.median_tokens:>9.1f}{row.p99_tokens:>6}"
        )
    print(f"{'total':<22}{stats.total:>8}")
    if args.json:
        Path(args.json).write_text(
            json.dumps(stats.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        log.info("wrote %s", args.json)
    return EXIT_OK


def _cmd_transform(args) -> int:
    pairs = parse_corpus(args.dataset)
    samples = to_context_target(pairs)
    if args.cap is not None:
        seed = args.seed if args.seed is not None else 0
        samples = subsample_class(
            samples, Role.BYSTANDER_OTHER, args.cap, derive_seed(seed, "subsample"), unit=args.cap_unit
        )
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "target_text": s.target_text,
                        "context_text": s.context_text,
                        "label": s.label,
                        "direction": s.direction,
                    }
                )
                + "\n"
            )
    log.info("wrote %d samples to %s", len(samples), out)
    return EXIT_OK


def _cmd_oversample_preview(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    bundle, batch = oversample_preview(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "provenance.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["synthetic_index", "label", "seed_index", "neighbor_index", "interpolation"])
        for i, (point, label) in enumerate(zip(batch.provenance, batch.labels.tolist())):
            writer.writerow([i, label, point.seed_index, point.neighbor_index, point.interpolation])
    import numpy as np

    before = np.bincount(bundle.y, minlength=5).tolist()
    after = (np.bincount(bundle.y, minlength=5) + np.bincount(batch.labels, minlength=5)).tolist()
    summary = {"counts_before": before, "counts_after": after, "synthetic_total": len(batch)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("wrote synthetic provenance for %d points to %s", len(batch), out)
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    model, bundle, timings = train_full(cfg)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.bin"
    save_model(model, model_path)
    manifest = {
        "config": cfg.as_dict(),
        "seed": cfg.seed,
        "n_samples": len(bundle.ids),
        "embedding_metadata": bundle.embedding_metadata,
        "timings_seconds": timings,
    }
    (out / "train_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("saved model to %s", model_path)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    model = load_model(args.model)
    report = evaluate_model(cfg, model)
    write_report_bundle(report, out)
    log.info(
        "weighted F1 %.4f (top-2 %.4f, thresholded %.4f, RR %.4f) -> %s",
        report.pooled.f1_weighted,
        report.pooled.top2_f1_weighted,
        report.pooled.thr_f1_weighted,
        report.pooled.rejection_rate,
        out,
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    report = run(cfg, output_dir=out)
    log.info(
        "pooled weighted F1 %.4f (top-2 %.4f, thresholded %.4f, tau %.4f, RR %.4f) -> %s",
        report.pooled.f1_weighted,
        report.pooled.top2_f1_weighted,
        report.pooled.thr_f1_weighted,
        report.tau,
        report.pooled.rejection_rate,
        out,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roledet", description="Cyberbullying role detection pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output", type=Path, default=None, help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress logging")

    p = sub.add_parser("stats", help="per-class counts and token-length percentiles")
    p.add_argument("--dataset", required=True, help="corpus JSONL path")
    p.add_argument("--json", default=None, help="also write stats JSON here")
    common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("transform", help="write directed context-target samples as JSONL")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=None, help="cap bystander-other samples")
    p.add_argument("--cap-unit", choices=["samples", "pairs"], default="samples")
    common(p)
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("oversample-preview", help="emit ADASYN provenance for audit")
    common(p)
    p.set_defaults(func=_cmd_oversample_preview)

    p = sub.add_parser("train", help="train one model on the whole dataset and save it")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model over the configured dataset")
    p.add_argument("--model", required=True, help="model artifact path")
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="full cross-validated pipeline")
    common(p)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except PipelineError as exc:
        cause = exc.__cause__
        log.error("%s", exc)
        if isinstance(cause, ConfigError):
            return EXIT_CONFIG
        if isinstance(cause, DataError):
            return EXIT_DATA
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
