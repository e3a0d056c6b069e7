"""Image-caption dataset manifests.

A dataset is a JSONL manifest, one pair per line:

    {"id": "p0001", "caption": "a dog on a beach", "image": "imgs/p0001.png"}

Image paths are resolved relative to the manifest's directory. An optional
"split" field ("train"/"test", default "test") lets calibration exports pool
from training pairs only. build_barcode_dataset writes a self-contained
synthetic dataset whose images are stripe barcodes of their captions.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

from . import raster
from .storefmt import ExportError


@dataclass(frozen=True)
class Pair:
    id: str
    caption: str
    image: str | None = None
    split: str = "test"


def load_manifest(path: str) -> list[Pair]:
    base = os.path.dirname(os.path.abspath(path))
    pairs: list[Pair] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: bad JSON: {exc}") from None
            if "id" not in obj or "caption" not in obj:
                raise ExportError(f"{path}:{lineno}: pair needs 'id' and 'caption'")
            pair_id = str(obj["id"])
            if pair_id in seen:
                raise ExportError(f"{path}:{lineno}: duplicate pair id {pair_id!r}")
            seen.add(pair_id)
            image = obj.get("image")
            if image is not None:
                image = os.path.join(base, image) if not os.path.isabs(image) else image
            pairs.append(Pair(id=pair_id, caption=str(obj["caption"]), image=image,
                              split=str(obj.get("split", "test"))))
    if not pairs:
        raise ExportError(f"{path}: empty manifest")
    return pairs


def build_barcode_dataset(directory: str, captions: list[str], split: str = "test",
                          prefix: str = "p") -> str:
    """Render one barcode image per caption and write the manifest; returns its path."""
    os.makedirs(os.path.join(directory, "imgs"), exist_ok=True)
    width = max(4, len(str(len(captions) - 1)))
    lines = []
    for i, caption in enumerate(captions):
        pair_id = f"{prefix}{i:0{width}d}"
        rel = os.path.join("imgs", pair_id + ".png")
        raster.render_barcode(caption).save(os.path.join(directory, rel))
        lines.append(json.dumps(
            {"id": pair_id, "caption": caption, "image": rel, "split": split},
            separators=(",", ":"),
        ))
    manifest = os.path.join(directory, "manifest.jsonl")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    return manifest
