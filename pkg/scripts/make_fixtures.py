#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/data/ and configs/.

All generators are seeded; rerunning reproduces the committed files byte for
byte. Corpus fixtures use per-class token vocabularies so the hashing
embedder yields (near-)separable latent classes, with controlled vocabulary
overlap where a fixture is meant to be confusable.
"""

import argparse
import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"
CONFIGS = ROOT / "configs"

ROLE_SHARES = {0: 0.20, 1: 0.18, 2: 0.14, 3: 0.12, 4: 0.36}


def _vocab(prefix, size=40):
    return [f"{prefix}{i:02d}" for i in range(size)]


def _comment(rng, vocab, n_lo=4, n_hi=10):
    n = int(rng.integers(n_lo, n_hi))
    return " ".join(rng.choice(vocab, size=n))


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {path} ({len(rows)} pairs)")


def gen_separable(seed=101, n_pairs=300):
    """Disjoint per-class vocabularies: latent classes are cleanly separated."""
    rng = np.random.default_rng(seed)
    vocabs = {c: _vocab(f"c{c}tok") for c in ROLE_SHARES}
    labels = list(ROLE_SHARES)
    probs = np.array(list(ROLE_SHARES.values()))
    rows = []
    for i in range(n_pairs):
        q_role, a_role = rng.choice(labels, size=2, p=probs)
        rows.append(
            {
                "pair_id": f"sep{i:04d}",
                "question": _comment(rng, vocabs[q_role]),
                "answer": _comment(rng, vocabs[a_role]),
                "q_role": int(q_role),
                "a_role": int(a_role),
            }
        )
    write_corpus(DATA / "corpus_separable.jsonl", rows)


def gen_confusable(seed=202, n_pairs=300, flip=0.15):
    """Classes 0 and 1 share most of their vocabulary and 15% of their labels
    are swapped, mimicking harasser/victim confusion."""
    rng = np.random.default_rng(seed)
    shared01 = _vocab("sh01tok", 40)
    vocabs = {
        0: shared01 + _vocab("c0own", 12),
        1: shared01 + _vocab("c1own", 12),
        2: _vocab("c2tok"),
        3: _vocab("c3tok"),
        4: _vocab("c4tok"),
    }
    shares = {0: 0.25, 1: 0.25, 2: 0.13, 3: 0.12, 4: 0.25}
    labels = list(shares)
    probs = np.array(list(shares.values()))

    def noisy(role):
        if role in (0, 1) and rng.random() < flip:
            return 1 - role
        return role

    rows = []
    for i in range(n_pairs):
        q_role, a_role = rng.choice(labels, size=2, p=probs)
        rows.append(
            {
                "pair_id": f"cnf{i:04d}",
                "question": _comment(rng, vocabs[q_role]),
                "answer": _comment(rng, vocabs[a_role]),
                "q_role": int(noisy(q_role)),
                "a_role": int(noisy(a_role)),
            }
        )
    write_corpus(DATA / "corpus_confusable.jsonl", rows)


def gen_imbalanced(seed=303, n_pairs=260):
    """Minority victim class whose vocabulary half-overlaps the harasser class;
    the imbalance pushes plain classifiers toward the majority."""
    rng = np.random.default_rng(seed)
    harasser = _vocab("h0tok", 40)
    vocabs = {
        0: harasser,
        1: harasser[:20] + _vocab("v1own", 20),
        2: _vocab("c2tok"),
        3: _vocab("c3tok"),
        4: _vocab("c4tok"),
    }
    shares = {0: 0.38, 1: 0.04, 2: 0.14, 3: 0.12, 4: 0.32}
    labels = list(shares)
    probs = np.array(list(shares.values()))
    rows = []
    for i in range(n_pairs):
        q_role, a_role = rng.choice(labels, size=2, p=probs)
        rows.append(
            {
                "pair_id": f"imb{i:04d}",
                "question": _comment(rng, vocabs[q_role]),
                "answer": _comment(rng, vocabs[a_role]),
                "q_role": int(q_role),
                "a_role": int(a_role),
            }
        )
    write_corpus(DATA / "corpus_imbalanced.jsonl", rows)


def gen_adasyn_fixture(seed=404, counts=(500, 100, 50, 20, 10), dim=8):
    """Five Gaussian blobs with the acceptance-criterion class counts."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c, n in enumerate(counts):
        center = rng.normal(scale=4.0, size=dim)
        X.append(center + rng.normal(scale=1.0, size=(n, dim)))
        y.append(np.full(n, c))
    np.savez(DATA / "adasyn_fixture.npz", X=np.vstack(X), y=np.concatenate(y))
    print(f"wrote {DATA / 'adasyn_fixture.npz'} (counts {counts}, dim {dim})")


def gen_adaboost_fixture(seed=505, n=30):
    """30-sample 3-class 2-D set for the boosting-recurrence oracle."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [3.0, 0.5], [1.5, 3.0]])
    y = np.repeat([0, 1, 2], n // 3)
    X = centers[y] + rng.normal(scale=1.1, size=(n, 2))
    np.savez(DATA / "adaboost_fixture.npz", X=X, y=y)
    print(f"wrote {DATA / 'adaboost_fixture.npz'}")


def gen_gbt_fixture(seed=606, n=400, d=4, levels=48):
    """Few distinct values per feature so histogram splits stay lossless."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-3.0, 3.0, levels)
    X = grid[rng.integers(0, levels, size=(n, d))]
    logits = np.stack(
        [X[:, 0] + 0.5 * X[:, 1], X[:, 2] - X[:, 0], 0.7 * X[:, 3] + 0.3 * X[:, 1]], axis=1
    )
    y = (logits + rng.normal(scale=0.8, size=logits.shape)).argmax(axis=1)
    np.savez(DATA / "gbt_fixture.npz", X=X, y=y)
    print(f"wrote {DATA / 'gbt_fixture.npz'} (classes {np.bincount(y)})")


def write_example_config():
    cfg = {
        "dataset": "tests/data/corpus_separable.jsonl",
        "seed": 7,
        "output_dir": "out/demo",
        "bystander_other_cap": 5000,
        "fusion": {"lambda": 0.5},
        "embedding": {"provider": "baseline", "dim": 256},
        "adasyn": {"enabled": True, "k": 15, "beta": 1.0, "scope": "per-fold"},
        "model": {
            "kind": "mlp",
            "max_epochs": 8,
            "patience_epochs": 5,
            "batch_size": 128,
            "l2_strength": 0.09,
            "dropout_rate": 0.3,
        },
        "eval": {"folds": 10, "threshold_class": 1, "threshold_percentile": 25},
    }
    path = CONFIGS / "example.json"
    path.write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.parse_args()
    DATA.mkdir(parents=True, exist_ok=True)
    CONFIGS.mkdir(parents=True, exist_ok=True)
    gen_separable()
    gen_confusable()
    gen_imbalanced()
    gen_adasyn_fixture()
    gen_adaboost_fixture()
    gen_gbt_fixture()
    write_example_config()


if __name__ == "__main__":
    main()
