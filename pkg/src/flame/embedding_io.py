"""Ingestion and persistence: embedding pools, query vectors, labels, sessions.

Pools come in two interchangeable formats, JSON Lines (one record per line,
fields ``id``/``vector``/``gt``/``image_ref``/``meta``) and a compact binary
layout (magic ``FLMP``, little-endian header, float32 vectors). Ground-truth
labels ride along but are only surfaced through the oracle/eval accessors so
they cannot leak into sampling.
"""

from __future__ import annotations

import csv
import json
import struct
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    EmptyPoolError,
    FormatError,
    UnknownShotError,
)

BINARY_MAGIC = b"FLMP"
BINARY_VERSION = 1
_GT_ABSENT = 255


@dataclass
class EmbeddingRecord:
    """One detection proposal: id, embedding, optional ground truth and crop."""

    id: str
    vector: np.ndarray
    gt_label: int | None = None
    image_ref: str | None = None
    meta: dict[str, str] | None = None


def validate_pool(records: list[EmbeddingRecord]) -> list[EmbeddingRecord]:
    """Enforce pool invariants: non-empty, unique ids, one finite dimension."""
    if not records:
        raise EmptyPoolError("pool contains no records")
    seen: set[str] = set()
    dim = records[0].vector.shape[0]
    for rec in records:
        if rec.id in seen:
            raise FormatError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        if rec.vector.ndim != 1 or rec.vector.shape[0] != dim:
            raise DimensionError(
                f"record {rec.id!r} has dimension {rec.vector.shape}, expected ({dim},)")
        if not np.all(np.isfinite(rec.vector)):
            raise FormatError(f"record {rec.id!r} contains non-finite values")
        if rec.gt_label is not None and rec.gt_label not in (0, 1):
            raise FormatError(f"record {rec.id!r} has non-binary gt {rec.gt_label!r}")
    return records


def load_pool(path: str | Path) -> list[EmbeddingRecord]:
    """Load and validate a pool, auto-detecting JSONL vs binary."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return _load_pool_binary(path)
    return _load_pool_jsonl(path)


def _load_pool_jsonl(path: Path) -> list[EmbeddingRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in doc or "vector" not in doc:
                raise FormatError(f"{path}:{lineno}: record needs 'id' and 'vector'")
            records.append(EmbeddingRecord(
                id=str(doc["id"]),
                vector=np.asarray(doc["vector"], dtype=np.float64),
                gt_label=doc.get("gt"),
                image_ref=doc.get("image_ref"),
                meta=doc.get("meta")))
    return validate_pool(records)


def save_pool_jsonl(records: list[EmbeddingRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            doc: dict = {"id": rec.id, "vector": rec.vector.tolist()}
            if rec.gt_label is not None:
                doc["gt"] = rec.gt_label
            if rec.image_ref is not None:
                doc["image_ref"] = rec.image_ref
            if rec.meta is not None:
                doc["meta"] = rec.meta
            fh.write(json.dumps(doc) + "\n")


def _load_pool_binary(path: Path) -> list[EmbeddingRecord]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != BINARY_MAGIC:
        raise FormatError(f"{path}: missing FLMP magic")
    try:
        version, count, dim = struct.unpack_from("<HQI", blob, 4)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc
    if version != BINARY_VERSION:
        raise FormatError(f"{path}: unsupported binary version {version}")
    offset = 4 + 2 + 8 + 4
    records = []
    for idx in range(count):
        try:
            (id_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            rec_id = blob[offset:offset + id_len].decode("utf-8")
            offset += id_len
            vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
            gt_byte = blob[offset]
            offset += 1
        except (struct.error, ValueError, IndexError, UnicodeDecodeError) as exc:
            raise FormatError(f"{path}: corrupt record #{idx}: {exc}") from exc
        gt = None if gt_byte == _GT_ABSENT else int(gt_byte)
        records.append(EmbeddingRecord(
            id=rec_id, vector=vec.astype(np.float64), gt_label=gt))
    return validate_pool(records)


def save_pool_binary(records: list[EmbeddingRecord], path: str | Path) -> None:
    """Write the compact layout; vectors are stored as little-endian float32."""
    if not records:
        raise EmptyPoolError("refusing to write an empty pool")
    dim = records[0].vector.shape[0]
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<HQI", BINARY_VERSION, len(records), dim))
        for rec in records:
            encoded = rec.id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"record id too long: {rec.id[:40]!r}...")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(rec.vector.astype("<f4").tobytes())
            gt = _GT_ABSENT if rec.gt_label is None else int(rec.gt_label)
            fh.write(struct.pack("<B", gt))


def pool_vectors(records: list[EmbeddingRecord]) -> np.ndarray:
    return np.stack([rec.vector for rec in records])


def pool_gt_labels(records: list[EmbeddingRecord]) -> np.ndarray | None:
    """Ground truth for the oracle/eval paths; None when any record lacks it."""
    if any(rec.gt_label is None for rec in records):
        return None
    return np.asarray([rec.gt_label for rec in records], dtype=np.int64)


def load_query(path: str | Path) -> np.ndarray:
    """Load a query embedding: either a JSON array or {"vector": [...]}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        if "vector" not in doc:
            raise FormatError(f"{path}: query object needs a 'vector' field")
        doc = doc["vector"]
    vec = np.asarray(doc, dtype=np.float64)
    if vec.ndim != 1 or not np.all(np.isfinite(vec)):
        raise FormatError(f"{path}: query must be a finite 1-D vector")
    return vec


def save_query(vector: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"vector": np.asarray(vector).tolist()}, fh)


LABEL_COLUMNS = ["shot_id", "label", "annotator", "timestamp"]


def save_labels(labels: dict[str, int], path: str | Path, *,
                annotator: str = "cli",
                timestamp: str | None = None) -> None:
    """Persist a label map as CSV (shot_id, label, annotator, RFC 3339 time)."""
    stamp = timestamp or datetime.now(timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABEL_COLUMNS)
        for shot_id, label in labels.items():
            writer.writerow([shot_id, label, annotator, stamp])


def load_labels(path: str | Path, *,
                valid_ids: set[str] | None = None) -> dict[str, int]:
    """Restore a label map; duplicate rows resolve last-write-wins."""
    labels: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "shot_id" not in reader.fieldnames:
            raise FormatError(f"{path}: missing label CSV header")
        for row in reader:
            shot_id = row["shot_id"]
            raw = row["label"]
            if raw not in ("0", "1"):
                raise FormatError(
                    f"{path}: non-binary label {raw!r} for shot {shot_id!r}")
            if valid_ids is not None and shot_id not in valid_ids:
                raise UnknownShotError(
                    f"label for unknown shot id {shot_id!r}", shot_id=shot_id)
            if shot_id in labels:
                warnings.warn(
                    f"duplicate label rows for {shot_id!r}; keeping the last",
                    stacklevel=2)
            labels[shot_id] = int(raw)
    return labels


SESSION_PHASES = ("sampling", "awaiting_labels", "trained", "evaluated")


@dataclass
class SessionState:
    """Durable state of one human-in-the-loop labeling session."""

    session_id: str
    config: dict
    pool_path: str
    query_path: str
    shot_ids: list[str]
    phase: str = "sampling"
    labels: dict[str, int] = field(default_factory=dict)
    candidates: list[dict] = field(default_factory=list)
    model_json: str | None = None
    report: dict | None = None
    audit: list[dict] = field(default_factory=list)

    def advance(self, phase: str) -> None:
        order = SESSION_PHASES.index
        if order(phase) < order(self.phase):
            raise FormatError(
                f"phase may only move forward: {self.phase} -> {phase}")
        self.phase = phase

    def to_json(self) -> str:
        return json.dumps({
            "session_id": self.session_id,
            "config": self.config,
            "pool_path": self.pool_path,
            "query_path": self.query_path,
            "shot_ids": self.shot_ids,
            "phase": self.phase,
            "labels": self.labels,
            "candidates": self.candidates,
            "model_json": self.model_json,
            "report": self.report,
            "audit": self.audit,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SessionState":
        doc = json.loads(text)
        return cls(**doc)
