"""Deterministic synthetic manifests for demos, tests and benchmarks.

The real dataset behind this system is private, so exercising the pipeline
at realistic scale needs stand-in inventories: class histograms with the
same totals and skew (many classes with three to five images, a long tail,
some singletons) and manifests whose image ids follow the stub backend's
``<class>_<n>`` grouping convention.
"""

import numpy as np

from .types import BoundingBox, DatasetManifest, ManifestEntry


# How many classes hold n images, for n = 1..22: 276 classes, 2078 images,
# peaked at 4-5 images with a long tail, like the source project's inventory.
PAPER_SCALE_TABLE = {
    1: 19, 2: 5, 3: 18, 4: 46, 5: 58, 6: 7, 7: 8, 8: 26, 9: 25, 10: 3,
    11: 7, 12: 8, 13: 9, 14: 2, 15: 4, 16: 5, 17: 8, 18: 1, 19: 3, 20: 5,
    21: 7, 22: 2,
}


def paper_scale_histogram(seed: int = 0) -> list:
    """Per-class image counts at full inventory scale (276 classes, 2078 images).

    The count multiset is fixed; the seed only shuffles which class gets
    which count.
    """
    counts = [n for n, k in sorted(PAPER_SCALE_TABLE.items()) for _ in range(k)]
    rng = np.random.default_rng(seed)
    return [counts[i] for i in rng.permutation(len(counts))]


def _jittered_box(rng) -> BoundingBox:
    x = float(rng.uniform(0.02, 0.25))
    y = float(rng.uniform(0.02, 0.25))
    w = float(rng.uniform(0.35, 0.7))
    h = float(rng.uniform(0.35, 0.7))
    w = min(w, 1.0 - x)
    h = min(h, 1.0 - y)
    return BoundingBox(x, y, w, h, confidence=1.0, source="user")


def make_manifest(
    counts,
    seed: int = 0,
    uri_prefix: str = "mem://images",
    with_boxes: bool = True,
    class_prefix: str = "e",
) -> DatasetManifest:
    """Unassigned manifest over synthetic classes; ids follow ``e007_03``."""
    rng = np.random.default_rng(seed)
    entries = []
    for ci, count in enumerate(counts):
        cls = f"{class_prefix}{ci:03d}"
        for ii in range(count):
            image_id = f"{cls}_{ii:02d}"
            entries.append(
                ManifestEntry(
                    image_id=image_id,
                    uri=f"{uri_prefix}/{image_id}.jpg",
                    individual_id=cls,
                    split="unassigned",
                    box=_jittered_box(rng) if with_boxes else None,
                )
            )
    return DatasetManifest(tuple(entries))


def uniform_manifest(
    n_classes: int,
    images_per_class: int,
    seed: int = 0,
    **kwargs,
) -> DatasetManifest:
    return make_manifest([images_per_class] * n_classes, seed=seed, **kwargs)
