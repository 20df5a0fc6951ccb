"""Dataset manifest I/O and the stratified train/test split.

The on-disk format is UTF-8 JSON lines, one object per line:

    {"image_id": "...", "uri": "...", "individual_id": "...",
     "split": "train|test|unassigned", "box": {"x":..,"y":..,"w":..,"h":..}}

``individual_id``, ``split`` and ``box`` are optional.
"""

import json
import math
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .types import BoundingBox, DatasetManifest, ManifestEntry


def _parse_line(line: str, lineno: int) -> ManifestEntry:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON ({exc.msg})", line=lineno) from exc
    if not isinstance(obj, dict):
        raise ManifestError("expected a JSON object", line=lineno)
    try:
        image_id = obj["image_id"]
        uri = obj.get("uri", "")
    except KeyError as exc:
        raise ManifestError(f"missing field {exc.args[0]!r}", line=lineno) from exc
    box = None
    if obj.get("box") is not None:
        try:
            box = BoundingBox.from_dict(obj["box"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"invalid box: {exc}", line=lineno) from exc
    try:
        return ManifestEntry(
            image_id=image_id,
            uri=uri,
            individual_id=obj.get("individual_id") or None,
            split=obj.get("split") or "unassigned",
            box=box,
        )
    except ValueError as exc:
        raise ManifestError(str(exc), line=lineno) from exc


def load_manifest(path) -> DatasetManifest:
    """Parse a JSON-lines manifest; errors carry 1-based line numbers."""
    path = Path(path)
    entries = []
    seen = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            entry = _parse_line(line, lineno)
            if entry.image_id in seen:
                raise ManifestError(
                    f"duplicate image id {entry.image_id!r} "
                    f"(first seen on line {seen[entry.image_id]})",
                    line=lineno,
                )
            seen[entry.image_id] = lineno
            entries.append(entry)
    return DatasetManifest(tuple(entries))


def entry_to_dict(e: ManifestEntry) -> dict:
    d = {"image_id": e.image_id, "uri": e.uri}
    if e.individual_id is not None:
        d["individual_id"] = e.individual_id
    d["split"] = e.split
    if e.box is not None:
        d["box"] = e.box.to_dict()
    return d


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps(entry_to_dict(e), sort_keys=True) + "\n")
    tmp.replace(path)


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up (not banker's rounding)."""
    return int(math.floor(x + 0.5))


def stratified_split(
    manifest: DatasetManifest, test_fraction: float, seed: int
) -> DatasetManifest:
    """Assign train/test per class: test count = round(f*n), train keeps >= 1.

    Classes with a single image go entirely to train. Entries without an
    individual id stay unassigned. Deterministic for a given seed.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if manifest.is_split():
        raise ManifestError("manifest already has split assignments")

    rng = np.random.default_rng(seed)
    split_of = {}
    by_class = {}
    for e in manifest.entries:
        if e.individual_id is not None:
            by_class.setdefault(e.individual_id, []).append(e.image_id)

    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        n = len(ids)
        n_test = min(round_half_up(test_fraction * n), n - 1)
        order = rng.permutation(n)
        for rank, pos in enumerate(order):
            split_of[ids[pos]] = "test" if rank < n_test else "train"

    entries = tuple(
        ManifestEntry(
            image_id=e.image_id,
            uri=e.uri,
            individual_id=e.individual_id,
            split=split_of.get(e.image_id, "unassigned"),
            box=e.box,
        )
        for e in manifest.entries
    )
    return DatasetManifest(entries)


def split_sizes(manifest: DatasetManifest) -> dict:
    sizes = {"train": 0, "test": 0, "unassigned": 0}
    for e in manifest.entries:
        sizes[e.split] += 1
    return sizes
