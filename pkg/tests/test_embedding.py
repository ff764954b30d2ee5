import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roledet.embedding import (
    EmbeddingTable,
    FusionConfig,
    fuse,
    hash_embed,
    load_embedding_table,
    tokenize_baseline,
    write_embedding_table,
)
from roledet.errors import FormatError


class TestTokenizeBaseline:
    def test_punctuation_boundaries(self):
        assert tokenize_baseline("Hi there!") == ["hi", "there"]

    def test_empty(self):
        assert tokenize_baseline("") == []

    def test_whitespace_collapse(self):
        assert tokenize_baseline("a  b") == ["a", "b"]

    def test_lowercases(self):
        assert tokenize_baseline("ABC Def") == ["abc", "def"]


class TestHashEmbed:
    def test_deterministic(self):
        a = hash_embed("some text here", 64, seed=5)
        b = hash_embed("some text here", 64, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_seed_changes_vector(self):
        a = hash_embed("some text here", 64, seed=5)
        b = hash_embed("some text here", 64, seed=6)
        assert not np.array_equal(a, b)

    def test_unit_norm(self):
        vec = hash_embed("the quick brown fox", 128, seed=0)
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-9

    def test_empty_text_zero_vector(self):
        np.testing.assert_array_equal(hash_embed("", 32), np.zeros(32))

    def test_dim_lower_bound(self):
        with pytest.raises(ValueError):
            hash_embed("x", 4)

    @given(st.text(max_size=40), st.sampled_from([8, 32, 100]))
    @settings(max_examples=60)
    def test_norm_in_zero_or_one(self, text, dim):
        norm = np.linalg.norm(hash_embed(text, dim, seed=1))
        assert norm == 0.0 or abs(norm - 1.0) < 1e-9


class TestInterchangeFormat:
    def _table(self, dim=4):
        rng = np.random.default_rng(3)
        entries = {
            "p1:q": rng.standard_normal(dim).astype(np.float32),
            "p1:a": rng.standard_normal(dim).astype(np.float32),
        }
        return EmbeddingTable(dim=dim, entries=entries, metadata="pooling=first-token")

    def test_roundtrip_bitwise(self, tmp_path):
        table = self._table()
        path = tmp_path / "emb.cte"
        write_embedding_table(table, path)
        loaded = load_embedding_table(path)
        assert loaded.dim == 4
        assert loaded.metadata == "pooling=first-token"
        assert set(loaded.entries) == set(table.entries)
        for cid in table.entries:
            assert loaded.entries[cid].tobytes() == table.entries[cid].tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cte"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            load_embedding_table(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "emb.cte"
        write_embedding_table(self._table(), path)
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(FormatError, match="truncated"):
            load_embedding_table(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "emb.cte"
        write_embedding_table(self._table(), path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError, match="trailing"):
            load_embedding_table(path)

    def test_unicode_ids_and_metadata(self, tmp_path):
        table = EmbeddingTable(
            dim=8, entries={"pär:q": np.ones(8, np.float32)}, metadata="modèle"
        )
        path = tmp_path / "emb.cte"
        write_embedding_table(table, path)
        loaded = load_embedding_table(path)
        assert "pär:q" in loaded.entries and loaded.metadata == "modèle"


finite_vec = st.lists(
    st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False), min_size=3, max_size=3
).map(np.array)


class TestFuse:
    def test_arithmetic(self):
        out = fuse(np.array([1.0, 2.0]), np.array([3.0, 4.0]), FusionConfig(0.5))
        np.testing.assert_allclose(out, [2.5, 4.0])

    def test_zero_context_identity(self):
        t = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(fuse(t, np.zeros(3), FusionConfig(0.5)), t)

    def test_zero_lambda_identity(self):
        t = np.array([1.0, -2.0, 3.0])
        c = np.array([9.0, 9.0, 9.0])
        np.testing.assert_array_equal(fuse(t, c, FusionConfig(0.0)), t)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            fuse(np.zeros(3), np.zeros(4), FusionConfig())

    @given(finite_vec, finite_vec, finite_vec, st.floats(0, 10, allow_nan=False))
    @settings(max_examples=60)
    def test_additivity_in_target(self, t1, t2, c, lam):
        cfg = FusionConfig(lam)
        lhs = fuse(t1 + t2, c, cfg)
        rhs = fuse(t1, c, cfg) + fuse(t2, np.zeros(3), cfg)
        np.testing.assert_allclose(lhs, rhs, atol=1e-6)
