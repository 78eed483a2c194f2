"""Source-model library: persistence, fingerprints, and DTW-based selection.

A library directory holds one ``*.lstm.json`` model file plus one
fingerprint CSV (same syntax as trace-csv, but values are standardized so
they may be negative) per entry, and a ``library.json`` manifest listing
them in insertion order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dtw import DtwResult, dtw
from .errors import DegenerateInputError, ModelFormatError, RttlabError
from .model_io import MODEL_SUFFIX, LstmModel, load_model_file, save_model_file
from .trace import RttTrace, Standardizer, parse_series, serialize_series

MANIFEST_NAME = "library.json"
FINGERPRINT_CAP = 6000
FINGERPRINT_SUFFIX = ".fingerprint.csv"


def downsample_fingerprint(series, cap: int = FINGERPRINT_CAP) -> np.ndarray:
    """Stride-downsample a series to at most ``cap`` points."""
    series = np.asarray(series, dtype=np.float64)
    if series.size <= cap:
        return series.copy()
    stride = int(np.ceil(series.size / cap))
    return series[::stride].copy()


@dataclass(eq=False)
class LibraryEntry:
    model: LstmModel
    fingerprint: np.ndarray  # standardized source series, <= FINGERPRINT_CAP points

    @property
    def context(self) -> str:
        return self.model.metadata.context


class ModelLibrary:
    """Ordered collection of pre-trained source models with fingerprints."""

    def __init__(self):
        self.entries: list[LibraryEntry] = []

    def __len__(self):
        return len(self.entries)

    def add(self, model: LstmModel, fingerprint) -> LibraryEntry:
        fingerprint = downsample_fingerprint(fingerprint)
        if fingerprint.size == 0:
            raise ValueError("fingerprint must be non-empty")
        if not np.all(np.isfinite(fingerprint)):
            raise ValueError("fingerprint must be finite")
        context = model.metadata.context
        if any(e.context == context for e in self.entries):
            raise ValueError(f"library already holds a model for context {context!r}")
        entry = LibraryEntry(model=model, fingerprint=fingerprint)
        self.entries.append(entry)
        return entry

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"format_version": 1, "entries": []}
        used = set()
        for entry in self.entries:
            stem = _slug(entry.context)
            while stem in used:
                stem += "-x"
            used.add(stem)
            model_file = stem + MODEL_SUFFIX
            fp_file = stem + FINGERPRINT_SUFFIX
            save_model_file(directory / model_file, entry.model)
            (directory / fp_file).write_text(
                serialize_series(entry.fingerprint), encoding="utf-8", newline="\n"
            )
            manifest["entries"].append(
                {
                    "context": entry.context,
                    "model_file": model_file,
                    "fingerprint_file": fp_file,
                }
            )
        (directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=1) + "\n", encoding="utf-8", newline="\n"
        )

    @classmethod
    def load(cls, directory) -> "ModelLibrary":
        directory = Path(directory)
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            raise ModelFormatError(f"no {MANIFEST_NAME} in {directory}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"unreadable manifest: {exc}") from None
        if manifest.get("format_version") != 1:
            raise ModelFormatError("unsupported library manifest version")
        library = cls()
        for item in manifest.get("entries", []):
            model = load_model_file(directory / item["model_file"])
            fingerprint, _ = parse_series(
                (directory / item["fingerprint_file"]).read_bytes()
            )
            library.add(model, fingerprint)
        return library


@dataclass
class SelectionResult:
    entry: LibraryEntry
    index: int
    distance: DtwResult
    all_normalized: list[float]


def select_source(library: ModelLibrary, target_sample: RttTrace) -> SelectionResult:
    """Pick the library entry with minimum normalized DTW to the target.

    The target sample is standardized first so selection is scale-free;
    ties break toward earlier insertion order.
    """
    if len(library) == 0:
        raise RttlabError("cannot select from an empty library")
    if len(target_sample) < 2:
        raise DegenerateInputError("target sample must hold at least 2 points")
    target = Standardizer.fit(target_sample.samples).transform(target_sample.samples)
    target = downsample_fingerprint(target)

    best: SelectionResult | None = None
    normalized = []
    for index, entry in enumerate(library.entries):
        result = dtw(target, entry.fingerprint)
        normalized.append(result.normalized)
        if best is None or result.normalized < best.distance.normalized:
            best = SelectionResult(
                entry=entry, index=index, distance=result, all_normalized=normalized
            )
    best.all_normalized = normalized
    return best


def _slug(context: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", context.lower()).strip("-")
    return slug or "model"
