"""Text/image encoder backends.

The offline default is the "barcode" stub: captions hash to a 256-bit
digest, the paired image renders that digest as stripes, and both sides
embed the recovered bits as a unit vector over the first 255 coordinates.
Text-side embeddings (documents and queries) additionally carry a constant
offset on the reserved last coordinate, reproducing the cluster geometry of
contrastive encoders with a knob for its size. Per-record noise is seeded
from the content digest, so encoding is deterministic end to end.

Real checkpoints (any other model id) go through transformers' CLIP
classes; torch is imported only on that path.
"""
from __future__ import annotations

import hashlib

import numpy as np

from . import raster


def l2_normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms < 1e-12, 1.0, norms)


def _content_rng(token: str) -> np.random.Generator:
    seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(seed)


class BarcodeEncoder:
    """Deterministic stub encoder over sha256 stripe barcodes."""

    SEMANTIC = raster.BITS - 1  # last coordinate is reserved for the offset

    def __init__(self, gap: float = 1.0, noise_sigma: float = 0.02):
        self.name = f"barcode:gap={gap:g}:sigma={noise_sigma:g}"
        self.dimension = raster.BITS
        self.gap = gap
        self.noise_sigma = noise_sigma

    def _semantic(self, bits: list[int]) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        signs = np.where(np.asarray(bits[: self.SEMANTIC], dtype=np.float64) > 0, 1.0, -1.0)
        vec[: self.SEMANTIC] = signs / np.sqrt(self.SEMANTIC)
        return vec

    def _finish(self, vec: np.ndarray, noise_key: str, offset: float) -> np.ndarray:
        noise = _content_rng(noise_key).standard_normal(self.dimension) * self.noise_sigma
        out = vec + noise
        out[-1] += offset
        return out

    def encode_texts(self, texts: list[str], kind: str = "text") -> np.ndarray:
        rows = np.empty((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            bits = raster.digest_bits(text)
            key = f"{kind}|{hashlib.sha256(bytes(bits)).hexdigest()}"
            rows[i] = self._finish(self._semantic(bits), key, self.gap)
        return l2_normalize(rows).astype(np.float32)

    def encode_images(self, images) -> np.ndarray:
        from PIL import Image

        rows = np.empty((len(images), self.dimension), dtype=np.float64)
        for i, image in enumerate(images):
            img = Image.open(image) if isinstance(image, str) else image
            bits = raster.decode_barcode(img)
            key = f"image|{hashlib.sha256(bytes(bits)).hexdigest()}"
            rows[i] = self._finish(self._semantic(bits), key, 0.0)
        return l2_normalize(rows).astype(np.float32)


class ClipEncoder:
    """Real pretrained checkpoint via transformers; loaded lazily."""

    def __init__(self, model_id: str, device: str = "cpu", batch_size: int = 16):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self.name = model_id
        self.device = device
        self.batch_size = batch_size
        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_id).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.dimension = int(self.model.config.projection_dim)

    def _batches(self, items):
        for start in range(0, len(items), self.batch_size):
            yield items[start:start + self.batch_size]

    def encode_texts(self, texts: list[str], kind: str = "text") -> np.ndarray:
        del kind  # real encoders make no role distinction
        chunks = []
        with self._torch.no_grad():
            for batch in self._batches(texts):
                inputs = self.processor(
                    text=batch, return_tensors="pt", padding=True, truncation=True
                ).to(self.device)
                feats = self.model.get_text_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return l2_normalize(np.concatenate(chunks)).astype(np.float32)

    def encode_images(self, images) -> np.ndarray:
        from PIL import Image

        chunks = []
        with self._torch.no_grad():
            for batch in self._batches(images):
                pil = [Image.open(i).convert("RGB") if isinstance(i, str) else i for i in batch]
                inputs = self.processor(images=pil, return_tensors="pt").to(self.device)
                feats = self.model.get_image_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return l2_normalize(np.concatenate(chunks)).astype(np.float32)


def load_encoder(model_id: str, device: str = "cpu", batch_size: int = 16):
    """"barcode[:gap=G][:sigma=S]" builds the stub; anything else is a checkpoint."""
    if model_id == "barcode" or model_id.startswith("barcode:"):
        kwargs = {}
        for part in model_id.split(":")[1:]:
            key, _, value = part.partition("=")
            if key == "gap":
                kwargs["gap"] = float(value)
            elif key == "sigma":
                kwargs["noise_sigma"] = float(value)
            else:
                raise ValueError(f"unknown barcode parameter {key!r}")
        return BarcodeEncoder(**kwargs)
    return ClipEncoder(model_id, device=device, batch_size=batch_size)
