"""Binary embedding store, sidecar metadata, qrels text files.

This is the interchange boundary: anything that can write these formats can
feed the engine. Layout of the data file:

    header  '<4sHIQB' = magic "MMS1", version u16, dimension u32,
            record_count u64, dtype u8 (0 = float32 little-endian)
    payload record_count raw vectors, dimension * 4 bytes each, record order

Metadata lives in a sidecar at ``path + ".meta"``, one JSON object per line
in record order. Unknown sidecar fields are preserved on round-trip.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Corpus,
    DimensionMismatch,
    Document,
    Modality,
    Qrels,
    Query,
    Role,
    ValidationError,
)

MAGIC = b"MMS1"
VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sHIQB")
HEADER_SIZE = _HEADER.size  # 19 bytes


class StoreError(Exception):
    """Base for file-level store failures."""


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class UnsupportedDtype(StoreError):
    pass


class Truncated(StoreError):
    pass


class MetaMismatch(StoreError):
    pass


class DuplicatePart(ValidationError):
    def __init__(self, doc_id: str, modality: Modality):
        super().__init__(f"duplicate part ({doc_id!r}, {modality})")
        self.doc_id = doc_id
        self.modality = modality


@dataclass(frozen=True)
class StoreRecordMeta:
    """Sidecar entry for one stored vector.

    doc_id groups DocumentPart records into documents; empty for queries.
    extra carries provenance fields written by exporters, ignored here.
    """

    id: str
    role: Role
    modality: Modality
    doc_id: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {
            "id": self.id,
            "role": self.role.value,
            "modality": self.modality.value,
            "doc_id": self.doc_id,
        }
        for key in sorted(self.extra):
            obj[key] = self.extra[key]
        return json.dumps(obj, separators=(",", ":"), sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "StoreRecordMeta":
        obj = json.loads(line)
        extra = {k: v for k, v in obj.items() if k not in ("id", "role", "modality", "doc_id")}
        return cls(
            id=obj["id"],
            role=Role.parse(obj["role"]),
            modality=Modality.parse(obj["modality"]),
            doc_id=obj.get("doc_id", ""),
            extra=extra,
        )


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, used for input digests in run headers."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return f"{fnv1a64(fh.read()):016x}"


def meta_path(path: str) -> str:
    return path + ".meta"


def write_store(records: list[tuple[StoreRecordMeta, np.ndarray]], path: str,
                dimension: int | None = None) -> None:
    """Write vectors + sidecar. Byte-identical output for identical input."""
    if dimension is None:
        dimension = int(records[0][1].shape[0]) if records else 1
    if dimension < 1:
        raise ValidationError(f"store dimension must be >= 1, got {dimension}")

    payload = bytearray()
    lines: list[str] = []
    for meta, vec in records:
        v = np.asarray(vec, dtype="<f4")
        if v.ndim != 1 or v.shape[0] != dimension:
            raise DimensionMismatch(dimension, v.shape[-1] if v.ndim else 0, f"record {meta.id!r}")
        payload += v.tobytes()
        lines.append(meta.to_json())

    header = _HEADER.pack(MAGIC, VERSION, dimension, len(records), DTYPE_FLOAT32)
    atomic_write_bytes(path, header + bytes(payload))
    atomic_write_text(meta_path(path), "".join(line + "\n" for line in lines))


def read_store(path: str) -> list[tuple[StoreRecordMeta, np.ndarray]]:
    """Inverse of write_store; rejects malformed headers and short payloads."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise Truncated(f"{path}: {len(blob)} bytes, header needs {HEADER_SIZE}")
    magic, version, dimension, count, dtype = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} != {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {VERSION}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype}, expected {DTYPE_FLOAT32}")

    expected = HEADER_SIZE + count * dimension * 4
    if len(blob) != expected:
        raise Truncated(f"{path}: {len(blob)} bytes, header implies {expected}")

    mpath = meta_path(path)
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except FileNotFoundError as exc:
        raise MetaMismatch(f"{mpath}: sidecar missing") from exc
    if len(lines) != count:
        raise MetaMismatch(f"{mpath}: {len(lines)} meta lines, store has {count} records")

    vectors = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(count, dimension)
    out: list[tuple[StoreRecordMeta, np.ndarray]] = []
    for i, line in enumerate(lines):
        try:
            meta = StoreRecordMeta.from_json(line)
        except (json.JSONDecodeError, KeyError, ValidationError) as exc:
            raise MetaMismatch(f"{mpath}:{i + 1}: {exc}") from exc
        out.append((meta, vectors[i].copy()))
    return out


def assemble_corpus(records: list[tuple[StoreRecordMeta, np.ndarray]]) -> tuple[Corpus, list[Query]]:
    """Group DocumentPart records into Documents, split out Queries.

    Ordering is stable by first appearance in the record stream.
    """
    dimension = 0
    queries: list[Query] = []
    parts: dict[str, dict[Modality, np.ndarray]] = {}
    for meta, vec in records:
        if dimension == 0:
            dimension = int(vec.shape[0])
        elif vec.shape[0] != dimension:
            raise DimensionMismatch(dimension, int(vec.shape[0]), f"record {meta.id!r}")
        if meta.role is Role.QUERY:
            queries.append(Query(id=meta.id, embedding=vec, modality=meta.modality))
        else:
            doc_id = meta.doc_id or meta.id
            by_mod = parts.setdefault(doc_id, {})
            if meta.modality in by_mod:
                raise DuplicatePart(doc_id, meta.modality)
            by_mod[meta.modality] = vec

    documents = tuple(Document(id=doc_id, parts=by_mod) for doc_id, by_mod in parts.items())
    return Corpus(documents=documents, dimension=dimension), queries


def corpus_records(corpus: Corpus, queries: list[Query] = ()) -> list[tuple[StoreRecordMeta, np.ndarray]]:
    """Flatten a corpus (+ queries) back into store records."""
    records: list[tuple[StoreRecordMeta, np.ndarray]] = []
    for q in queries:
        records.append((StoreRecordMeta(id=q.id, role=Role.QUERY, modality=q.modality), q.embedding))
    for doc in corpus.documents:
        for modality in sorted(doc.parts, key=lambda m: m.value):
            records.append(
                (
                    StoreRecordMeta(
                        id=f"{doc.id}#{modality.value}",
                        role=Role.DOCUMENT_PART,
                        modality=modality,
                        doc_id=doc.id,
                    ),
                    doc.parts[modality],
                )
            )
    return records


def load_qrels(path: str, max_grade: int | None = None) -> Qrels:
    """Parse `query_id 0 doc_id grade` lines, one judgment per line."""
    judgments: dict[tuple[str, str], int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            qid, _, doc_id, grade_s = fields
            try:
                grade = int(grade_s)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad grade {grade_s!r}") from exc
            if grade < 0:
                raise ValidationError(f"{path}:{lineno}: negative grade {grade}")
            judgments[(qid, doc_id)] = grade
    if max_grade is None:
        max_grade = max([1] + list(judgments.values()))
    return Qrels(judgments=judgments, max_grade=max_grade)


def save_qrels(qrels: Qrels, path: str) -> None:
    lines = [f"{qid} 0 {doc_id} {grade}" for (qid, doc_id), grade in qrels.judgments.items()]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
