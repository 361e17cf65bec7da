"""File output utilities for experiment results.

Every result file carries the config hash and a git-style content digest
(SHA-1 over ``"blob <size>\\0" + payload``) of its data section, so reruns
of the same config produce byte-identical files.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import hashlib
import json
from pathlib import Path
import struct
from typing import Any

import numpy as np
import structlog

from calderon_lab.models.conductivity import ConductivityField, disk_mask, grid_coordinates
from calderon_lab.models.measurement import DatasetRecord

logger = structlog.get_logger(__name__)

FIELD_MAGIC = b"CLFG"


class FileOperationError(Exception):
    """Base exception for file operation errors."""


class FilePermissionError(FileOperationError):
    """Directory or file cannot be written."""


class FileIntegrityError(FileOperationError):
    """File content does not match its expected structure."""


def ensure_directory(path: Path) -> Path:
    """Ensure directory exists, create if it doesn't.

    Raises:
        FilePermissionError: If unable to create directory
    """
    try:
        if not path.exists():
            path.mkdir(parents=True, exist_ok=True)
            logger.debug("Created directory", path=str(path))
        return path
    except OSError as e:
        raise FilePermissionError(f"Cannot create directory {path}: {e}") from e


def content_digest(payload: bytes) -> str:
    """Git blob digest of ``payload``."""
    header = f"blob {len(payload)}\0".encode()
    return hashlib.sha1(header + payload, usedforsecurity=False).hexdigest()


def calculate_file_hash(file_path: Path, algorithm: str = "sha256") -> str:
    """Hex digest of a file's bytes.

    Raises:
        FileOperationError: If the file cannot be read or the algorithm is unknown
    """
    try:
        hasher = hashlib.new(algorithm)
        with file_path.open("rb") as f:
            for chunk in iter(lambda: f.read(65536), b""):
                hasher.update(chunk)
        return hasher.hexdigest()
    except (OSError, ValueError) as e:
        raise FileOperationError(f"Cannot hash {file_path}: {e}") from e


def _write_bytes(path: Path, payload: bytes) -> Path:
    ensure_directory(path.parent)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_bytes(payload)
        tmp.replace(path)
    except OSError as e:
        tmp.unlink(missing_ok=True)
        raise FilePermissionError(f"Cannot write {path}: {e}") from e
    logger.debug("Wrote file", path=str(path), bytes=len(payload))
    return path


def _canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False)


def write_json_result(path: Path, data: dict[str, Any], *, config_hash: str) -> Path:
    """JSON result with ``config_hash`` and ``content_digest`` of ``data``."""
    body = _canonical_json(data)
    document = {
        "config_hash": config_hash,
        "content_digest": content_digest(body.encode("utf-8")),
        "data": data,
    }
    return _write_bytes(path, (_canonical_json(document) + "\n").encode("utf-8"))


def read_json_result(path: Path) -> dict[str, Any]:
    """Read a JSON result and verify its content digest.

    Raises:
        FileIntegrityError: If the digest does not match
    """
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FileOperationError(f"Cannot read {path}: {e}") from e
    body = _canonical_json(document.get("data"))
    if content_digest(body.encode("utf-8")) != document.get("content_digest"):
        raise FileIntegrityError(f"content digest mismatch in {path}")
    return document


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv_result(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    config_hash: str,
) -> Path:
    """CSV with a leading comment line carrying config hash and content digest."""
    lines = [",".join(header)]
    lines.extend(",".join(_format_cell(v) for v in row) for row in rows)
    body = "\n".join(lines) + "\n"
    digest = content_digest(body.encode("utf-8"))
    payload = f"# config_hash={config_hash} content_digest={digest}\n{body}"
    return _write_bytes(path, payload.encode("utf-8"))


def read_csv_result(path: Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse a result CSV into (comment metadata, rows as dicts)."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileOperationError(f"Cannot read {path}: {e}") from e
    first, _, body = text.partition("\n")
    if not first.startswith("#"):
        raise FileIntegrityError(f"missing metadata line in {path}")
    meta = dict(item.split("=", 1) for item in first[1:].split())
    if content_digest(body.encode("utf-8")) != meta.get("content_digest"):
        raise FileIntegrityError(f"content digest mismatch in {path}")
    lines = body.splitlines()
    header = lines[0].split(",")
    return meta, [dict(zip(header, line.split(","), strict=True)) for line in lines[1:]]


def write_dataset(path: Path, record: DatasetRecord) -> Path:
    return _write_bytes(path, (record.model_dump_json(indent=2) + "\n").encode("utf-8"))


def read_dataset(path: Path) -> DatasetRecord:
    try:
        return DatasetRecord.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FileOperationError(f"Cannot read {path}: {e}") from e


def write_field_csv(path: Path, field: ConductivityField) -> Path:
    """Flat CSV (x, y, value) over grid points inside the disk."""
    x, y = grid_coordinates(field.grid_n)
    mask = disk_mask(field.grid_n)
    lines = ["x,y,value"]
    lines.extend(
        f"{xi!r},{yi!r},{vi!r}"
        for xi, yi, vi in zip(
            x[mask].tolist(), y[mask].tolist(), field.values[mask].tolist(), strict=True
        )
    )
    return _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def write_field_binary(path: Path, values: np.ndarray, *, masked: bool = True) -> Path:
    """Binary grid: magic, grid_n (uint32), mask flag (uint8), row-major <f8 body."""
    arr = np.asarray(values, dtype="<f8")
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise FileOperationError(f"field must be a square grid, got shape {arr.shape}")
    header = FIELD_MAGIC + struct.pack("<IB", arr.shape[0], int(masked))
    return _write_bytes(path, header + np.ascontiguousarray(arr).tobytes())


def read_field_binary(path: Path) -> tuple[np.ndarray, bool]:
    """Inverse of ``write_field_binary``: (values, mask flag)."""
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise FileOperationError(f"Cannot read {path}: {e}") from e
    if payload[:4] != FIELD_MAGIC:
        raise FileIntegrityError(f"{path} is not a field file")
    grid_n, masked = struct.unpack("<IB", payload[4:9])
    body = np.frombuffer(payload[9:], dtype="<f8")
    if body.shape[0] != grid_n * grid_n:
        raise FileIntegrityError(f"{path}: expected {grid_n}^2 values, got {body.shape[0]}")
    return body.reshape(grid_n, grid_n).astype(np.float64), bool(masked)


def write_text(path: Path, text: str) -> Path:
    return _write_bytes(path, text.encode("utf-8"))
