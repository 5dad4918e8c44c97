"""Artifact store for run outputs: CSV tables, NetPBM images, sidecars and meshes."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Fixed textual form so repeated runs write identical bytes."""
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.12g}{value.imag:+.12g}j"
    return str(value)


def diverging_colormap(values: np.ndarray, limit: float | None = None) -> np.ndarray:
    """Blue for positive, red for negative, white at zero; pinned to +/- limit."""
    values = np.asarray(values, dtype=float)
    if limit is None:
        limit = float(np.max(np.abs(values))) if values.size else 0.0
    if limit <= 0:
        scaled = np.zeros_like(values)
    else:
        scaled = np.clip(values / limit, -1.0, 1.0)
    fade = np.rint((1.0 - np.abs(scaled)) * 255).astype(np.uint8)
    full = np.full_like(fade, 255)
    positive = scaled >= 0
    red = np.where(positive, fade, full)
    green = fade
    blue = np.where(positive, full, fade)
    return np.stack([red, green, blue], axis=-1)


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6 encoding of an (height, width, 3) uint8 image."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    height, width, _ = rgb.shape
    return f"P6\n{width} {height}\n255\n".encode("ascii") + rgb.tobytes()


def field_image(values: np.ndarray, limit: float | None = None) -> np.ndarray:
    """Image of a field indexed (q, p): q left to right, p bottom to top."""
    return diverging_colormap(np.asarray(values).T[::-1, :], limit)


class ArtifactStore:
    """Writes every file a run produces under one output directory."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self._written: list[Path] = []

    def _path(self, name: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _record(self, path: Path) -> Path:
        self._written.append(path)
        logger.info("Wrote %s", path)
        return path

    @property
    def written(self) -> list[Path]:
        return list(self._written)

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
        path = self._path(name)
        path.write_text(buffer.getvalue(), encoding="utf-8")
        return self._record(path)

    def write_matrix(self, name: str, values: np.ndarray) -> Path:
        """CSV dump of a 2-D field, one row per first-axis index."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for row in np.atleast_2d(values):
            writer.writerow([format_value(v) for v in row])
        path = self._path(name)
        path.write_text(buffer.getvalue(), encoding="utf-8")
        return self._record(path)

    def write_column(self, name: str, header: str, values: Iterable[Any]) -> Path:
        return self.write_table(name, (header,), ((v,) for v in values))

    def write_image(self, name: str, values: np.ndarray, limit: float | None = None) -> Path:
        path = self._path(name)
        path.write_bytes(encode_ppm(field_image(values, limit)))
        return self._record(path)

    def write_sidecar(self, name: str, metadata: Mapping[str, Any]) -> Path:
        """Plain-text ``key=value`` lines, nested keys dotted, sorted."""
        lines = [f"{key}={value}" for key, value in sorted(flatten_metadata(metadata).items())]
        path = self._path(name)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return self._record(path)

    def write_mesh(self, name: str, vertices: np.ndarray, faces: np.ndarray) -> Path:
        """Wavefront OBJ; planar vertices get z = 0, faces are 1-based."""
        vertices = np.asarray(vertices, dtype=float)
        if vertices.shape[1] == 2:
            vertices = np.column_stack([vertices, np.zeros(len(vertices))])
        lines = [f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces, dtype=int)]
        path = self._path(name)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return self._record(path)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Path):
        return str(value)
    return value


def flatten_metadata(metadata: Mapping[str, Any], prefix: str = "") -> dict[str, str]:
    flat: dict[str, str] = {}
    for key, value in metadata.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten_metadata(value, prefix=f"{name}."))
            continue
        plain = _jsonable(value)
        flat[name] = json.dumps(plain, sort_keys=True) if isinstance(plain, list) else format_value(plain)
    return flat


def parse_sidecar(text: str) -> dict[str, str]:
    """Inverse of the sidecar layout, values left as strings."""
    pairs = (line.partition("=") for line in text.splitlines() if line.strip())
    return {key: value for key, _, value in pairs}
