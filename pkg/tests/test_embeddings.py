import numpy as np
import pytest

from app.core.error_handler import ContractError, EmbeddingParseError, MissingInputError
from app.services.embedding_service import (
    bow,
    cosine,
    export_table,
    hash_provider,
    load_table,
    make_provider,
    toy_kb_provider,
)


def test_hash_vectors_are_deterministic_unit_vectors():
    a, b = hash_provider(16, 3), hash_provider(16, 3)
    np.testing.assert_array_equal(a.embed("tray"), b.embed("tray"))
    assert np.linalg.norm(a.embed("tray")) == pytest.approx(1.0)
    assert not np.allclose(a.embed("tray"), hash_provider(16, 4).embed("tray"))
    with pytest.raises(ContractError):
        a.embed("")


def test_embed_returns_a_copy():
    provider = hash_provider(4, 0)
    v = provider.embed("box")
    v[:] = 0.0
    assert np.linalg.norm(provider.embed("box")) == pytest.approx(1.0)


def test_bag_of_words():
    provider = hash_provider(8, 1)
    np.testing.assert_array_equal(bow([], provider), np.zeros(8))
    expected = (provider.embed("milk") + provider.embed("fridge")) / 2
    np.testing.assert_allclose(provider.bow(["milk", "fridge"]), expected)


def test_table_round_trip(tmp_path):
    source = hash_provider(6, 2)
    path = export_table(source, ["tray", "box", "tray"], tmp_path / "vectors.txt")
    loaded = load_table(path, expected_dim=6)
    assert loaded.tokens == ["box", "tray"]
    np.testing.assert_allclose(loaded.embed("tray"), source.embed("tray"))
    assert loaded.digest


def test_table_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("tray 0.1 0.2\nbox 0.3\n", encoding="utf-8")
    with pytest.raises(EmbeddingParseError) as info:
        load_table(path, expected_dim=2)
    assert info.value.line_number == 2
    with pytest.raises(MissingInputError):
        load_table(tmp_path / "absent.txt", expected_dim=2)


def test_toy_kb_groups_related_tokens():
    kb = toy_kb_provider(32, 3)
    assert cosine(kb.embed("box"), kb.embed("crate")) > cosine(kb.embed("box"), kb.embed("mop"))
    assert "stool" in kb


def test_provider_selection(tmp_path):
    assert make_provider(8, 1).source == "hash"
    assert make_provider(8, 1, conceptnet=True).source == "toy-kb"
    path = export_table(hash_provider(8, 1), ["tray"], tmp_path / "t.txt")
    assert make_provider(8, 1, table_path=str(path)).source == "file"
