"""Synthetic online-handwriting generator with a parametric style space.

Samples are sequences of (x, y, pen) triplets built from polyline glyph
templates.  Every generation step is keyed by an explicit seed, so
regenerating a sample from (content, style, seed) is bit-exact.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .templates import ALPHABET_SIZE, DEFAULT_TEMPLATES, GlyphTemplate, arclength_resample, template_hash

GENERATOR_VERSION = "1.0"

# Arc-length samples per glyph at speed 1.  Sequences must be long enough
# for the 4-block style encoder (76-sample receptive field), so this is
# deliberately generous.
BASE_POINTS_PER_GLYPH = 36

# Horizontal gap between consecutive glyph boxes, in template units.
GLYPH_GAP = 0.35
GLYPH_ADVANCE = 1.0 + GLYPH_GAP


class SynthError(ValueError):
    """Rejected input to the synthetic generator or its oracles."""


@dataclass(frozen=True)
class StyleParams:
    """Parametric ground-truth style of a rendered sample."""

    slant: float = 0.0       # shear angle, radians
    scale: float = 1.0       # global size multiplier
    speed: float = 1.0       # resampling rate multiplier (higher = fewer samples)
    jitter: float = 0.0      # per-sample Gaussian noise std, stroke units
    baseline_drift: float = 0.0  # vertical drift per glyph, stroke units

    RANGES = {
        "slant": (-0.5, 0.5),
        "scale": (0.5, 2.0),
        "speed": (0.5, 2.0),
        "jitter": (0.0, 0.05),
        "baseline_drift": (-0.05, 0.05),
    }

    def validate(self) -> "StyleParams":
        for name, (lo, hi) in self.RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise SynthError(f"style parameter {name}={v} outside [{lo}, {hi}]")
        return self

    def to_dict(self) -> dict:
        return {
            "slant": self.slant,
            "scale": self.scale,
            "speed": self.speed,
            "jitter": self.jitter,
            "drift": self.baseline_drift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StyleParams":
        return cls(
            slant=d["slant"],
            scale=d["scale"],
            speed=d["speed"],
            jitter=d.get("jitter", 0.0),
            baseline_drift=d.get("drift", 0.0),
        )


@dataclass(frozen=True)
class StrokeSequence:
    """Time-ordered pen samples: (x, y, pen) rows, ending pen-up."""

    samples: np.ndarray  # (T, 3) float64; pen column is 0/1

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 2:
            raise SynthError("stroke sequence must be (T, 3) with T >= 2")
        if not np.isfinite(arr).all():
            raise SynthError("stroke coordinates must be finite")
        if arr[-1, 2] != 0.0:
            raise SynthError("stroke sequence must end pen-up")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return self.samples[:, :2]

    @property
    def pen(self) -> np.ndarray:
        return self.samples[:, 2]

    def pen_down_runs(self) -> list[np.ndarray]:
        """Maximal pen-down segments, each an (n, 2) coordinate array."""
        runs = []
        start = None
        pen = self.pen
        for i in range(len(self)):
            if pen[i] == 1.0 and start is None:
                start = i
            elif pen[i] == 0.0 and start is not None:
                runs.append(self.samples[start:i, :2])
                start = None
        if start is not None:
            runs.append(self.samples[start:, :2])
        return runs


@dataclass(frozen=True)
class ContentSequence:
    """Glyph-id sequence plus its one-hot encoding."""

    symbols: tuple[int, ...]
    alphabet_size: int = ALPHABET_SIZE

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise SynthError("content must contain at least one glyph")
        if any(not (0 <= s < self.alphabet_size) for s in self.symbols):
            raise SynthError(f"glyph ids must lie in [0, {self.alphabet_size})")
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self.symbols), self.alphabet_size), dtype=np.float64)
        out[np.arange(len(self.symbols)), self.symbols] = 1.0
        return out


@dataclass(frozen=True)
class LabeledSample:
    strokes: StrokeSequence
    content: ContentSequence
    style: StyleParams
    seed: int


def samples_per_glyph(speed: float, base_points: int = BASE_POINTS_PER_GLYPH) -> int:
    return max(4, int(round(base_points / speed)))


def render_sample(
    content: ContentSequence,
    style: StyleParams,
    seed: int,
    templates: list[GlyphTemplate] | None = None,
    base_points: int = BASE_POINTS_PER_GLYPH,
) -> StrokeSequence:
    """Render a glyph-id sequence under the given style, deterministically.

    Each glyph is arc-length resampled at a rate proportional to 1/speed,
    sheared by slant, scaled, shifted by the per-glyph baseline drift, and
    jittered with seeded Gaussian noise.  Exactly one pen-up transition
    sample separates consecutive glyphs, and the sequence ends pen-up.
    """
    templates = DEFAULT_TEMPLATES if templates is None else templates
    style.validate()
    for s in content.symbols:
        if s >= len(templates):
            raise SynthError(f"unknown glyph id {s} (have {len(templates)} templates)")

    rng = np.random.default_rng(seed)
    n = samples_per_glyph(style.speed, base_points)
    shear = np.tan(style.slant)

    rows = []
    last_end = None
    for i, sym in enumerate(content.symbols):
        pts = arclength_resample(templates[sym].polyline, n)
        pts = pts.copy()
        pts[:, 0] = pts[:, 0] + shear * pts[:, 1]  # shear about the baseline
        pts[:, 0] += i * GLYPH_ADVANCE
        pts[:, 1] += i * style.baseline_drift / max(style.scale, 1e-12)
        pts *= style.scale
        # Noise is drawn unconditionally so the rng stream does not depend
        # on jitter; jitter=0 renders are exactly noiseless.
        pts = pts + style.jitter * rng.standard_normal(pts.shape)
        if last_end is not None:
            mid = 0.5 * (last_end + pts[0])
            rows.append(np.array([[mid[0], mid[1], 0.0]]))
        rows.append(np.concatenate([pts, np.ones((n, 1))], axis=1))
        last_end = pts[-1]
    rows.append(np.array([[last_end[0], last_end[1], 0.0]]))
    return StrokeSequence(np.concatenate(rows, axis=0))


# ---------------------------------------------------------------------------
# Style sampling and dataset construction


DEFAULT_STYLE_SAMPLER = {
    "slant": (-0.45, 0.45),
    "scale": (0.6, 1.8),
    "speed": (0.7, 1.4),
    "jitter": (0.0, 0.02),
    "drift": (-0.04, 0.04),
}


def sample_style(rng: np.random.Generator, sampler: dict | None = None) -> StyleParams:
    """Draw a StyleParams uniformly from per-parameter ranges."""
    spec = dict(DEFAULT_STYLE_SAMPLER)
    if sampler:
        unknown = set(sampler) - set(spec)
        if unknown:
            raise SynthError(f"unknown style sampler keys: {sorted(unknown)}")
        spec.update(sampler)
    draw = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in spec.items()}
    return StyleParams(
        slant=draw["slant"],
        scale=draw["scale"],
        speed=draw["speed"],
        jitter=draw["jitter"],
        baseline_drift=draw["drift"],
    ).validate()


def make_dataset(
    num_samples: int,
    alphabet_size: int = ALPHABET_SIZE,
    min_len: int = 3,
    max_len: int = 5,
    style_sampler: dict | None = None,
    seed: int = 0,
    base_points: int = BASE_POINTS_PER_GLYPH,
) -> list[LabeledSample]:
    """Generate i.i.d. labeled samples; bit-identical for identical arguments."""
    if not (1 <= min_len <= max_len):
        raise SynthError("require 1 <= min_len <= max_len")
    if alphabet_size > len(DEFAULT_TEMPLATES):
        raise SynthError(f"alphabet_size exceeds available templates ({len(DEFAULT_TEMPLATES)})")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(num_samples):
        length = int(rng.integers(min_len, max_len + 1))
        symbols = tuple(int(s) for s in rng.integers(0, alphabet_size, size=length))
        style = sample_style(rng, style_sampler)
        sample_seed = int(rng.integers(0, 2**31 - 1))
        content = ContentSequence(symbols, alphabet_size=alphabet_size)
        strokes = render_sample(content, style, sample_seed, base_points=base_points)
        out.append(LabeledSample(strokes=strokes, content=content, style=style, seed=sample_seed))
    return out


# ---------------------------------------------------------------------------
# Dataset file format: line-delimited JSON records plus a manifest.


def sample_to_record(sample: LabeledSample) -> dict:
    return {
        "symbols": list(sample.content.symbols),
        "style": sample.style.to_dict(),
        "seed": sample.seed,
        "strokes": [[float(x), float(y), int(p)] for x, y, p in sample.strokes.samples],
    }


def record_to_sample(rec: dict, alphabet_size: int = ALPHABET_SIZE) -> LabeledSample:
    return LabeledSample(
        strokes=StrokeSequence(np.array(rec["strokes"], dtype=np.float64)),
        content=ContentSequence(tuple(rec["symbols"]), alphabet_size=alphabet_size),
        style=StyleParams.from_dict(rec["style"]),
        seed=int(rec["seed"]),
    )


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_dataset(samples: list[LabeledSample], out_dir: Path, params: dict) -> Path:
    """Write records.jsonl plus manifest.json recording generation parameters."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    with open(records_path, "w") as f:
        for sample in samples:
            f.write(json.dumps(sample_to_record(sample)) + "\n")
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "template_hash": template_hash(),
        "num_samples": len(samples),
        "params": params,
        "records_sha256": file_sha256(records_path),
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return records_path


def load_dataset(dataset_dir: Path, verify_hash: bool = True) -> tuple[list[LabeledSample], dict]:
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    records_path = dataset_dir / "records.jsonl"
    if not manifest_path.exists():
        raise SynthError(f"missing dataset manifest: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if verify_hash and file_sha256(records_path) != manifest["records_sha256"]:
        raise SynthError(f"dataset records hash mismatch: {records_path}")
    alphabet = manifest.get("params", {}).get("alphabet_size", ALPHABET_SIZE)
    samples = []
    with open(records_path) as f:
        for line in f:
            samples.append(record_to_sample(json.loads(line), alphabet_size=alphabet))
    return samples, manifest
