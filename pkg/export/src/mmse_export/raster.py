"""Minimal text-to-image helpers built on Pillow.

render_barcode encodes the sha256 digest of a string as 256 vertical
black/white stripes; decode_barcode reads the stripes back from pixels.
The pair gives the offline stub encoder a genuine image pipeline whose
content is a deterministic function of the source text. rasterize_text
is a plain white-background text rendering for screenshot-style parts.
"""
from __future__ import annotations

import hashlib

from PIL import Image, ImageDraw

BITS = 256


def digest_bits(text: str) -> list[int]:
    """256 bits of the sha256 of the whitespace-normalized string."""
    canonical = " ".join(text.split()).lower()
    digest = hashlib.sha256(canonical.encode("utf-8")).digest()
    return [(byte >> (7 - i)) & 1 for byte in digest for i in range(8)]


def render_barcode(text: str, stripe_px: int = 2, height: int = 32) -> Image.Image:
    bits = digest_bits(text)
    img = Image.new("L", (BITS * stripe_px, height), color=255)
    draw = ImageDraw.Draw(img)
    for i, bit in enumerate(bits):
        if bit:
            draw.rectangle([i * stripe_px, 0, (i + 1) * stripe_px - 1, height - 1], fill=0)
    return img


def decode_barcode(img: Image.Image) -> list[int]:
    gray = img.convert("L")
    width, height = gray.size
    stripe_px = width // BITS
    if stripe_px < 1:
        raise ValueError(f"image too narrow for a {BITS}-stripe barcode: {width}px")
    pixels = gray.load()
    bits = []
    mid = height // 2
    for i in range(BITS):
        x = i * stripe_px + stripe_px // 2
        bits.append(1 if pixels[x, mid] < 128 else 0)
    return bits


def rasterize_text(text: str, width: int = 320, height: int = 48) -> Image.Image:
    img = Image.new("RGB", (width, height), color="white")
    ImageDraw.Draw(img).text((4, height // 3), text, fill="black")
    return img
