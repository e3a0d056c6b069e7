"""Export jobs: encode a dataset and write engine-format stores.

export() emits a retrieval store (queries plus paired text/image document
parts) with qrels; export_calibration() emits pooled raw samples tagged by
role/modality for the engine's own mean computation. All calibration math
stays in the engine; this side only encodes and tags.
"""
from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from .datasets import Pair, load_manifest
from .encoders import l2_normalize, load_encoder
from .storefmt import (
    MODALITY_IMAGE,
    MODALITY_TEXT,
    ROLE_DOCUMENT_PART,
    ROLE_QUERY,
    ExportError,
    Record,
    write_qrels,
    write_store,
)


@dataclass
class ExportJob:
    model: str
    manifest: str
    out: str
    batch_size: int = 16
    device: str = "cpu"
    query_mode: str = "text"  # text | average (how image+text queries reduce)
    qrels_out: str | None = None
    extra_provenance: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.query_mode not in ("text", "average"):
            raise ExportError(f"query_mode must be 'text' or 'average', got {self.query_mode!r}")


def _provenance(job: ExportJob, encoder) -> dict:
    prov = {"model": encoder.name, "preprocessing": "processor-defaults"}
    prov.update(job.extra_provenance)
    return prov


def export(job: ExportJob) -> tuple[int, int]:
    """Returns (n_queries, n_document_parts) written."""
    job.validate()
    pairs = load_manifest(job.manifest)
    missing = [p.id for p in pairs if p.image is None]
    if missing:
        raise ExportError(f"pairs without images cannot be exported: {missing[:5]}")
    encoder = load_encoder(job.model, device=job.device, batch_size=job.batch_size)
    prov = _provenance(job, encoder)

    captions = [p.caption for p in pairs]
    images = [p.image for p in pairs]
    query_vecs = encoder.encode_texts(captions, kind="query")
    text_vecs = encoder.encode_texts(captions, kind="text")
    image_vecs = encoder.encode_images(images)
    if job.query_mode == "average":
        query_vecs = l2_normalize(
            (query_vecs.astype(np.float64) + image_vecs.astype(np.float64)) / 2.0
        ).astype(np.float32)

    records: list[Record] = []
    judgments: dict[tuple[str, str], int] = {}
    for i, pair in enumerate(pairs):
        qid = f"q-{pair.id}"
        records.append(Record(
            id=qid, role=ROLE_QUERY, modality=MODALITY_TEXT, vector=query_vecs[i],
            extra={**prov, "query_mode": job.query_mode},
        ))
        judgments[(qid, pair.id)] = 1
    for i, pair in enumerate(pairs):
        records.append(Record(
            id=f"{pair.id}#{MODALITY_TEXT}", role=ROLE_DOCUMENT_PART, modality=MODALITY_TEXT,
            vector=text_vecs[i], doc_id=pair.id, extra=dict(prov),
        ))
        records.append(Record(
            id=f"{pair.id}#{MODALITY_IMAGE}", role=ROLE_DOCUMENT_PART, modality=MODALITY_IMAGE,
            vector=image_vecs[i], doc_id=pair.id, extra=dict(prov),
        ))

    write_store(records, job.out, dimension=encoder.dimension)
    write_qrels(judgments, job.qrels_out or job.out + ".qrels")
    return len(pairs), 2 * len(pairs)


ROLE_TAGS = {
    "query": (ROLE_QUERY, MODALITY_TEXT, "query"),
    "text": (ROLE_DOCUMENT_PART, MODALITY_TEXT, "text"),
    "image": (ROLE_DOCUMENT_PART, MODALITY_IMAGE, None),
}


def export_calibration(
    model: str,
    manifest: str,
    out: str,
    samples: int,
    profile: str = "default",
    roles: tuple[str, ...] = ("query", "text", "image"),
    split: str = "train",
    device: str = "cpu",
    batch_size: int = 16,
) -> int:
    """Pooled raw samples for mean estimation; returns records written.

    Draws the first `samples` pairs of the requested split in manifest
    order. Asking for more than the split holds warns and proceeds with
    everything available.
    """
    for role in roles:
        if role not in ROLE_TAGS:
            raise ExportError(f"unknown calibration role {role!r}")
    pairs = [p for p in load_manifest(manifest) if p.split == split]
    if not pairs:
        raise ExportError(f"{manifest}: no pairs in split {split!r}")
    if samples > len(pairs):
        warnings.warn(
            f"requested {samples} calibration samples but split {split!r} has "
            f"{len(pairs)}; using all of them",
            stacklevel=2,
        )
        print(f"warning: short calibration split ({len(pairs)} < {samples})", file=sys.stderr)
    chosen: list[Pair] = pairs[:samples]

    encoder = load_encoder(model, device=device, batch_size=batch_size)
    records: list[Record] = []
    for role in roles:
        role_tag, modality_tag, text_kind = ROLE_TAGS[role]
        if text_kind is not None:
            vecs = encoder.encode_texts([p.caption for p in chosen], kind=text_kind)
        else:
            missing = [p.id for p in chosen if p.image is None]
            if missing:
                raise ExportError(f"calibration pairs without images: {missing[:5]}")
            vecs = encoder.encode_images([p.image for p in chosen])
        for pair, vec in zip(chosen, vecs):
            records.append(Record(
                id=f"cal-{profile}-{role}-{pair.id}",
                role=role_tag,
                modality=modality_tag,
                vector=vec,
                doc_id=pair.id if role_tag == ROLE_DOCUMENT_PART else "",
                extra={"model": encoder.name, "profile": profile},
            ))
    write_store(records, out, dimension=encoder.dimension)
    return len(records)
