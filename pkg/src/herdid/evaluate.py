"""Measurement harness: top-k accuracy over single- and two-image probes,
swept over a grid of layer/pool/resolution configurations, rendered as JSON
and as aligned text tables.

The default grid is the seven standard configurations: max pooling 4/5/6 on
activation_40 and activation_43 at 512 px input, plus the unpooled
activation_43 run at 256 px.
"""

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .pipeline import DEFAULT_K_GRID, PipelineConfig, identify, top_k, train_pipeline
from .types import DatasetManifest, ImageInput


@dataclass(frozen=True)
class GridRow:
    layer_name: str
    pool_size: Optional[int]
    input_resolution: int

    @property
    def label(self) -> str:
        suffix = self.layer_name.rsplit("_", 1)[-1]
        if self.pool_size is None:
            return f"no pool act. {suffix}"
        return f"max_{self.pool_size} act. {suffix}"


DEFAULT_GRID = (
    GridRow("activation_40", 4, 512),
    GridRow("activation_40", 5, 512),
    GridRow("activation_40", 6, 512),
    GridRow("activation_43", 4, 512),
    GridRow("activation_43", 5, 512),
    GridRow("activation_43", 6, 512),
    GridRow("activation_43", None, 256),
)


@dataclass(frozen=True)
class Probe:
    individual_id: str
    image_ids: tuple
    undersized: bool = False


def build_probes(test_manifest: DatasetManifest, probe_size: int, seed: int):
    """Group test images into probes, one class at a time.

    probe_size 1: one probe per image. probe_size 2: images are shuffled
    (seeded) and paired consecutively; an odd trailing image wraps around to
    pair with the first one. Classes with a single test image yield a
    flagged size-1 probe. Every test image appears in at least one probe.
    """
    if probe_size not in (1, 2):
        raise ValueError(f"probe_size must be 1 or 2, got {probe_size}")
    by_class = {}
    for e in test_manifest.entries:
        if e.individual_id is not None:
            by_class.setdefault(e.individual_id, []).append(e.image_id)
    if not by_class:
        raise ValueError("test split is empty")

    rng = np.random.default_rng(seed)
    probes = []
    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        order = [ids[i] for i in rng.permutation(len(ids))]
        if probe_size == 1:
            probes.extend(Probe(cls, (i,)) for i in order)
            continue
        if len(order) == 1:
            probes.append(Probe(cls, (order[0],), undersized=True))
            continue
        for start in range(0, len(order) - 1, 2):
            probes.append(Probe(cls, (order[start], order[start + 1])))
        if len(order) % 2 == 1:
            probes.append(Probe(cls, (order[-1], order[0])))
    return probes


def top_k_accuracy(rankings, truths, k: int) -> float:
    """Fraction of probes whose true individual appears in the top k."""
    rankings = list(rankings)
    truths = list(truths)
    if len(rankings) != len(truths):
        raise ValueError("rankings and truths differ in length")
    if not rankings:
        raise ValueError("no probes to score")
    hits = sum(
        1 for r, truth in zip(rankings, truths)
        if truth in (i for i, _ in top_k(r, k))
    )
    return hits / len(rankings)


def per_class_top_k(rankings, truths, k: int) -> float:
    """Mean of per-class top-k accuracies over classes present in ``truths``."""
    rankings = list(rankings)
    truths = list(truths)
    if len(rankings) != len(truths):
        raise ValueError("rankings and truths differ in length")
    if not rankings:
        raise ValueError("no probes to score")
    per_class = {}
    for r, truth in zip(rankings, truths):
        hit = truth in (i for i, _ in top_k(r, k))
        acc = per_class.setdefault(truth, [0, 0])
        acc[0] += int(hit)
        acc[1] += 1
    return float(np.mean([h / n for h, n in per_class.values()]))


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple            # of dict
    metadata: dict = field(default_factory=dict)
    k_values: tuple = DEFAULT_K_GRID

    def to_json(self) -> str:
        payload = {
            "metadata": self.metadata,
            "k_values": list(self.k_values),
            "rows": list(self.rows),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        """Two aligned tables, one per probe size, paper-style rows/columns."""
        lines = []
        label_w = max([len(r["label"]) for r in self.rows] + [len("Top k")])
        for probe_size in (1, 2):
            rows = [r for r in self.rows if r["probe_size"] == probe_size]
            if not rows:
                continue
            lines.append(f"== probe size {probe_size} ==")
            header = "Top k".ljust(label_w) + "".join(
                f"{k:>8d}" for k in self.k_values
            )
            lines.append(header)
            for r in rows:
                cells = "".join(f"{r['top_k'][str(k)]:>8.3f}" for k in self.k_values)
                lines.append(r["label"].ljust(label_w) + cells)
            lines.append("")
        return "\n".join(lines)


def run_evaluation(
    manifest: DatasetManifest,
    backend_factory,
    base_config: PipelineConfig = PipelineConfig(),
    grid=DEFAULT_GRID,
    k_values=DEFAULT_K_GRID,
    seed: int = 0,
    store_factory=None,
    detector=None,
) -> EvaluationReport:
    """Train one model per grid row and score both probe sizes on the test split.

    ``backend_factory`` receives each row's PipelineConfig and must return a
    backend configured to match. Deterministic given the seed and a
    deterministic backend.
    """
    if not manifest.is_split():
        raise ValueError("manifest must be split before evaluation")
    test = manifest.subset("test")
    boxes = {
        e.image_id: e.box for e in test.entries if e.individual_id is not None
    }

    rows = []
    for grid_row in grid:
        config = replace(
            base_config,
            layer_name=grid_row.layer_name,
            pool_size=grid_row.pool_size,
            input_resolution=grid_row.input_resolution,
            seed=seed,
        )
        backend = backend_factory(config)
        store = store_factory(grid_row) if store_factory is not None else None
        model = train_pipeline(manifest, config, backend, store=store,
                               detector=detector)
        for probe_size in (1, 2):
            probes = build_probes(test, probe_size, seed)
            rankings = []
            truths = []
            for probe in probes:
                queries = [
                    (ImageInput(id=i, data=test.get(i).uri or None), _probe_box(boxes, i))
                    for i in probe.image_ids
                ]
                rankings.append(identify(model, queries, backend))
                truths.append(probe.individual_id)
            rows.append({
                "label": grid_row.label,
                "layer_name": grid_row.layer_name,
                "pool_size": grid_row.pool_size,
                "input_resolution": grid_row.input_resolution,
                "probe_size": probe_size,
                "top_k": {str(k): top_k_accuracy(rankings, truths, k) for k in k_values},
                "per_class_top_k": {
                    str(k): per_class_top_k(rankings, truths, k) for k in k_values
                },
            })

    from .manifest import split_sizes

    return EvaluationReport(
        rows=tuple(rows),
        metadata={
            "seed": seed,
            "split_sizes": split_sizes(manifest),
            "n_classes": len(manifest.class_counts()),
        },
        k_values=tuple(k_values),
    )


def _probe_box(boxes, image_id):
    from .types import BoundingBox

    box = boxes.get(image_id)
    return box if box is not None else BoundingBox(0.0, 0.0, 1.0, 1.0)
