import json
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    """A miniature randomly initialized BERT saved locally (no hub access)."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    root = tmp_path_factory.mktemp("tiny-bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [
        f"tok{i}" for i in range(20)
    ] + ["hello", "there", "you", "ok", "fine", "stop", "leave", "me", "alone"]
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file))
    tokenizer.save_pretrained(root)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(root)
    return root


@pytest.fixture
def corpus_path(tmp_path) -> Path:
    rows = [
        {"pair_id": "p1", "question": "hello there you", "answer": "ok fine", "q_role": 0, "a_role": 1},
        {"pair_id": "p2", "question": "stop", "answer": "leave me alone", "q_role": 0, "a_role": 1},
        {"pair_id": "p3", "question": "tok1 tok2 tok3 tok4", "answer": "", "q_role": 4, "a_role": 4},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path
