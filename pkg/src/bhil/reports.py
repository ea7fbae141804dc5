"""
Artifact writer: the single owner of every file an experiment produces.

Reports are JSON lines with sorted keys, slices are CSV, grids are .bhil files.
manifest.json lists every artifact with its sha256 and size.
"""

import csv
import hashlib
import io
import json
import logging
import pathlib
from collections.abc import Iterable, Sequence
from typing import Any

import numpy as np

from .exceptions import ConfigError
from .utils.gridio import write_grid
from .utils.validation import relative_artifact_name, validate_artifact_path

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def _default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, default=_default, allow_nan=True)


class ReportWriter:
    """Writes artifacts below out_dir and keeps the list for the manifest."""

    def __init__(self, out_dir: str | pathlib.Path) -> None:
        self.out_dir = pathlib.Path(out_dir)
        self._artifacts: dict[str, pathlib.Path] = {}

    def _path(self, name: str) -> pathlib.Path:
        path = validate_artifact_path(name, self.out_dir)
        if path is None:
            raise ConfigError(f"artifact name '{name}' leaves the output directory")
        path.parent.mkdir(parents=True, exist_ok=True)
        self._artifacts[relative_artifact_name(path, self.out_dir)] = path
        return path

    @property
    def artifacts(self) -> list[str]:
        return sorted(self._artifacts)

    def write_text(self, name: str, text: str) -> pathlib.Path:
        path = self._path(name)
        path.write_text(text, encoding="utf-8", newline="\n")
        logger.debug(f"Wrote {name}")
        return path

    def write_json(self, name: str, obj: Any) -> pathlib.Path:
        return self.write_text(name, json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n")

    def write_jsonl(self, name: str, records: Iterable[Any]) -> pathlib.Path:
        lines = [dumps(r) for r in records]
        return self.write_text(name, "".join(line + "\n" for line in lines))

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> pathlib.Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return self.write_text(name, buffer.getvalue())

    def write_grid(self, name: str, obj: Any, metadata: dict[str, Any] | None = None) -> pathlib.Path:
        return write_grid(self._path(name), obj, metadata)

    def write_image_slices(self, stem: str, values: np.ndarray, spec: Any, through: Sequence[float]) -> list[pathlib.Path]:
        """CSV slices at y2 nearest 0 and at the y2 of a point of interest."""
        y2 = spec.axis(1)
        indices = {"y2_zero": int(np.argmin(np.abs(y2))), "y2_point": int(np.argmin(np.abs(y2 - through[1])))}
        y1, y3 = spec.axis(0), spec.axis(2)
        paths = []
        for label, j in indices.items():
            rows = ((y1[i], y2[j], y3[k], values[i, j, k]) for i in range(len(y1)) for k in range(len(y3)))
            paths.append(self.write_csv(f"{stem}_{label}.csv", ("y1", "y2", "y3", "value"), rows))
        return paths

    def manifest(self, name: str) -> dict[str, Any]:
        entries = []
        for rel in self.artifacts:
            blob = self._artifacts[rel].read_bytes()
            entries.append({"name": rel, "sha256": hashlib.sha256(blob).hexdigest(), "bytes": len(blob)})
        return {"scenario": name, "artifacts": entries}

    def write_manifest(self, name: str) -> pathlib.Path:
        data = self.manifest(name)
        path = self.out_dir / MANIFEST
        path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n")
        logger.info(f"Manifest lists {len(data['artifacts'])} artifacts")
        return path
