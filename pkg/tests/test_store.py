"""Tests for result stores."""

import json

import pandas as pd

from rc_treatment_effects.store import (
    DirectoryResultStore,
    InMemoryResultStore,
    NullResultStore,
    create_result_store,
)


def _frame():
    return pd.DataFrame({"estimand": ["ATE_1"], "Mean": [4.0123456789012]})


def test_directory_store_writes_csv_and_json(tmp_path):
    store = DirectoryResultStore(tmp_path / "out")
    store.write_table("table_effects", _frame())
    store.write_json("study", {"b": 1, "a": [1.5, 2]})

    csv_text = (tmp_path / "out" / "table_effects.csv").read_text(encoding="utf-8")
    assert csv_text.splitlines() == ["estimand,Mean", "ATE_1,4.012345679"]
    raw = (tmp_path / "out" / "study.json").read_text(encoding="utf-8")
    assert raw.index('"a"') < raw.index('"b"')
    assert store.read_json("study") == {"a": [1.5, 2], "b": 1}
    assert store.read_json("missing") is None


def test_directory_store_keeps_explicit_suffix(tmp_path):
    store = DirectoryResultStore(tmp_path)
    store.write_json("golden.json", {"x": 1.0})
    assert json.loads((tmp_path / "golden.json").read_text(encoding="utf-8")) == {"x": 1.0}


def test_in_memory_store_roundtrip():
    store = InMemoryResultStore()
    store.write_table("errors", _frame())
    store.write_json("study", {"completed": 2})
    assert store.tables["errors"].startswith("estimand,Mean")
    assert store.read_json("study") == {"completed": 2}
    assert store.read_json("other") is None


def test_null_store_and_factory(tmp_path):
    null = NullResultStore()
    null.write_table("anything", _frame())
    assert null.read_json("anything") is None
    assert isinstance(create_result_store(None), NullResultStore)
    directory = create_result_store(tmp_path / "results")
    assert isinstance(directory, DirectoryResultStore)
    assert directory.root.is_dir()
