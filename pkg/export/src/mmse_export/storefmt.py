"""Writer for the mixsearch embedding-store format.

Implemented against the published layout rather than the engine's own
code so the exporter stays importable without the engine installed:
a 19-byte little-endian header (magic "MMS1", u16 version=1, u32
dimension, u64 record count, u8 dtype where 0 is float32), the raw
float32 payload in record order, and a `<path>.meta` JSON-lines sidecar
with one object per record. Qrels are `query_id 0 doc_id grade` lines.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MMS1"
VERSION = 1
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sHIQB")

ROLE_QUERY = "Query"
ROLE_DOCUMENT_PART = "DocumentPart"
MODALITY_TEXT = "Text"
MODALITY_IMAGE = "Image"


class ExportError(Exception):
    pass


@dataclass
class Record:
    id: str
    role: str
    modality: str
    vector: np.ndarray
    doc_id: str = ""
    extra: dict = field(default_factory=dict)

    def meta_json(self) -> str:
        obj = {"id": self.id, "role": self.role, "modality": self.modality,
               "doc_id": self.doc_id}
        for key in sorted(self.extra):
            obj[key] = self.extra[key]
        return json.dumps(obj, separators=(",", ":"))


def _atomic_write(path: str, blob: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_store(records: list[Record], path: str, dimension: int | None = None) -> None:
    if dimension is None:
        dimension = int(records[0].vector.shape[0]) if records else 1
    payload = bytearray()
    meta_lines = []
    for rec in records:
        vec = np.asarray(rec.vector, dtype="<f4")
        if vec.shape != (dimension,):
            raise ExportError(
                f"record {rec.id!r}: expected dimension {dimension}, got {vec.shape}"
            )
        payload += vec.tobytes()
        meta_lines.append(rec.meta_json())
    header = _HEADER.pack(MAGIC, VERSION, dimension, len(records), DTYPE_FLOAT32)
    _atomic_write(path, header + bytes(payload))
    _atomic_write(path + ".meta", "".join(line + "\n" for line in meta_lines).encode("utf-8"))


def write_qrels(judgments: dict[tuple[str, str], int], path: str) -> None:
    lines = [f"{qid} 0 {doc_id} {grade}" for (qid, doc_id), grade in sorted(judgments.items())]
    _atomic_write(path, "".join(line + "\n" for line in lines).encode("utf-8"))
