"""Result storage for tables, grids and JSON summaries."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional, Protocol, Union

import pandas as pd


def _dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class ResultStore(Protocol):
    """Interface for persisting study outputs."""

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        """Store a table under ``name``."""

    def write_json(self, name: str, payload: Dict[str, Any]) -> None:
        """Store a JSON document under ``name``."""

    def read_json(self, name: str) -> Optional[Dict[str, Any]]:
        """Return a stored JSON document, if any."""


class NullResultStore(ResultStore):
    """No-op store used when no output directory is configured."""

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        return None

    def write_json(self, name: str, payload: Dict[str, Any]) -> None:
        return None

    def read_json(self, name: str) -> Optional[Dict[str, Any]]:
        return None


class InMemoryResultStore(ResultStore):
    """Keeps the serialised outputs in dictionaries; mostly for tests."""

    def __init__(self) -> None:
        self.tables: Dict[str, str] = {}
        self.documents: Dict[str, str] = {}

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        self.tables[name] = frame.to_csv(index=False, float_format="%.10g")

    def write_json(self, name: str, payload: Dict[str, Any]) -> None:
        self.documents[name] = _dumps(payload)

    def read_json(self, name: str) -> Optional[Dict[str, Any]]:
        dump = self.documents.get(name)
        return None if dump is None else json.loads(dump)


class DirectoryResultStore(ResultStore):
    """Writes CSV tables and sorted-key JSON documents into a directory."""

    def __init__(self, root: Union[str, Path]) -> None:
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)

    @property
    def root(self) -> Path:
        return self._root

    def _path(self, name: str, suffix: str) -> Path:
        return self._root / (name if name.endswith(suffix) else f"{name}{suffix}")

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        frame.to_csv(self._path(name, ".csv"), index=False, float_format="%.10g")

    def write_json(self, name: str, payload: Dict[str, Any]) -> None:
        self._path(name, ".json").write_text(_dumps(payload), encoding="utf-8")

    def read_json(self, name: str) -> Optional[Dict[str, Any]]:
        path = self._path(name, ".json")
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


def create_result_store(out: Union[str, Path, None]) -> ResultStore:
    return NullResultStore() if out is None else DirectoryResultStore(out)
