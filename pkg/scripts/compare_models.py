#!/usr/bin/env python3
"""Run every classifier configuration on one corpus and print a comparison table.

Mirrors the headline experiment layout: overall weighted metrics plus top-2
F1, then the thresholded metrics and rejection rate, per model kind.

Usage:
    python scripts/compare_models.py --dataset tests/data/corpus_confusable.jsonl
"""

import argparse
import time
from pathlib import Path

from roledet.pipeline import PipelineConfig, run

MODEL_GRID = {
    "forest": {"kind": "forest", "n_trees": 50},
    "adaboost": {"kind": "adaboost", "n_rounds": 40},
    "gbt": {"kind": "gbt", "n_rounds": 40},
    "mlp": {
        "kind": "mlp",
        "hidden_sizes": [256, 128],
        "max_epochs": 40,
        "patience_epochs": 10,
    },
    "snapshot-ensemble": {
        "kind": "snapshot-ensemble",
        "hidden_sizes": [256, 128],
        "max_epochs": 40,
        "patience_epochs": 10,
        "snapshot_min_epoch": 20,
        "snapshot_interval": 5,
    },
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default="tests/data/corpus_confusable.jsonl")
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--no-adasyn", action="store_true")
    parser.add_argument("--output", default=None, help="directory for per-model report bundles")
    args = parser.parse_args()

    header = f"{'model':<20}{'A':>7}{'P':>7}{'R':>7}{'F1':>7}{'Top2':>7} | {'thr-F1':>7}{'RR':>7}{'tau':>7}{'sec':>7}"
    print(header)
    print("-" * len(header))
    for name, model in MODEL_GRID.items():
        cfg = PipelineConfig.from_dict(
            {
                "dataset": args.dataset,
                "seed": args.seed,
                "embedding": {"provider": "baseline", "dim": args.dim},
                "adasyn": {"enabled": not args.no_adasyn, "k": 5, "beta": 1.0},
                "model": model,
                "eval": {"folds": args.folds, "threshold_class": 1, "threshold_percentile": 25},
            }
        )
        start = time.perf_counter()
        out_dir = Path(args.output) / name if args.output else None
        report = run(cfg, output_dir=out_dir)
        elapsed = time.perf_counter() - start
        p = report.pooled
        print(
            f"{name:<20}{p.accuracy:>7.3f}{p.precision_weighted:>7.3f}"
            f"{p.recall_weighted:>7.3f}{p.f1_weighted:>7.3f}{p.top2_f1_weighted:>7.3f} | "
            f"{p.thr_f1_weighted:>7.3f}{p.rejection_rate:>7.3f}{report.tau:>7.3f}{elapsed:>7.1f}"
        )


if __name__ == "__main__":
    main()
