"""Command-line interface: train, evaluate, identify, detect, serve."""

import json
import sys
from pathlib import Path

import click

from .archive import load_archive, save_archive
from .backend import BackendConfig, get_backend
from .detect import OnnxDetector, StubDetector, detect_heads
from .evaluate import DEFAULT_GRID, GridRow, run_evaluation
from .feature_store import FeatureStore
from .manifest import load_manifest, split_sizes, stratified_split
from .pipeline import PipelineConfig, identify, top_k, train_pipeline
from .types import BoundingBox, ImageInput


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return PipelineConfig.from_json(path)


def _make_backend_factory(kind, embed_model, noise_scale=0.25):
    def factory(config: PipelineConfig):
        bc = BackendConfig(
            model_uri=embed_model or "",
            layer_name=config.layer_name,
            input_resolution=config.input_resolution,
        )
        if kind == "stub":
            return get_backend("stub", bc, noise_scale=noise_scale)
        return get_backend(kind, bc)

    return factory


def _make_detector(kind, detect_model):
    if kind == "stub":
        return StubDetector()
    if detect_model is None:
        return None
    return OnnxDetector(detect_model)


def _parse_box(text) -> BoundingBox:
    try:
        x, y, w, h = (float(p) for p in text.split(","))
        return BoundingBox(x, y, w, h)
    except ValueError as exc:
        raise click.BadParameter(f"box must be x,y,w,h fractions: {exc}")


backend_option = click.option(
    "--backend", type=click.Choice(["stub", "onnx"]), default="stub",
    show_default=True, help="Embedding/detector backend kind.",
)
embed_model_option = click.option(
    "--embed-model", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Path to the exported embedding network (ONNX backend).",
)


@click.group()
def main():
    """Animal re-identification toolkit."""


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file mirroring PipelineConfig.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None,
              help="Feature cache directory.")
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@backend_option
@embed_model_option
def train(manifest_path, config_path, out_path, store_dir, test_fraction, seed,
          backend, embed_model):
    """Train a model from a labeled manifest and write a model archive."""
    config = _load_config(config_path)
    manifest = load_manifest(manifest_path)
    if not manifest.is_split():
        manifest = stratified_split(manifest, test_fraction, seed=seed)
        click.echo(f"split manifest: {split_sizes(manifest)}")
    factory = _make_backend_factory(backend, embed_model)
    store = FeatureStore(store_dir) if store_dir else None
    archive = train_pipeline(manifest, config, factory(config), store=store)
    save_archive(archive, out_path)
    summary = archive.training_summary
    click.echo(
        f"trained {summary['n_classes']} classes on {summary['n_train_images']} "
        f"images ({summary['n_training_vectors']} vectors, "
        f"PCA rank {summary['pca_rank']}) -> {out_path}"
    )


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", "grid_path", default=None,
              help="JSON grid rows [{layer_name, pool_size, input_resolution}]; "
                   "defaults to the standard 7-row grid.")
@click.option("--report-out", "report_out", required=True,
              type=click.Path(dir_okay=False))
@click.option("--store-root", type=click.Path(file_okay=False), default=None)
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@backend_option
@embed_model_option
def evaluate(manifest_path, grid_path, report_out, store_root, test_fraction,
             seed, backend, embed_model):
    """Sweep the configuration grid and write JSON + text report tables."""
    manifest = load_manifest(manifest_path)
    if not manifest.is_split():
        manifest = stratified_split(manifest, test_fraction, seed=seed)
    if grid_path:
        with open(grid_path, "r", encoding="utf-8") as fh:
            grid = tuple(
                GridRow(r["layer_name"], r.get("pool_size"), r["input_resolution"])
                for r in json.load(fh)
            )
    else:
        grid = DEFAULT_GRID

    store_factory = None
    if store_root:
        root = Path(store_root)

        def store_factory(row):
            label = row.label.replace(" ", "_").replace(".", "")
            return FeatureStore(root / label)

    report = run_evaluation(
        manifest,
        _make_backend_factory(backend, embed_model),
        grid=grid,
        seed=seed,
        store_factory=store_factory,
    )
    out = Path(report_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(report.to_json(), encoding="utf-8")
    tmp.replace(out)
    click.echo(report.to_text())
    click.echo(f"report written to {out}")


@main.command(name="identify")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "images", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Query image; repeat for multi-image probes.")
@click.option("--box", "boxes", multiple=True,
              help="x,y,w,h fractions, aligned with --image order; "
                   "defaults to the full frame.")
@click.option("--top", "top_n", default=10, show_default=True)
@backend_option
@embed_model_option
def identify_cmd(model_path, images, boxes, top_n, backend, embed_model):
    """Rank known individuals for one or more query images."""
    archive = load_archive(model_path)
    config = PipelineConfig.from_dict(archive.pipeline_config)
    be = _make_backend_factory(backend, embed_model)(config)
    parsed = [_parse_box(b) for b in boxes]
    if parsed and len(parsed) != len(images):
        raise click.BadParameter("--box count must match --image count")
    if not parsed:
        parsed = [BoundingBox(0.0, 0.0, 1.0, 1.0)] * len(images)
    queries = [
        (ImageInput.from_path(p), box) for p, box in zip(images, parsed)
    ]
    ranking = identify(archive, queries, be)
    for rank, (individual_id, confidence) in enumerate(top_k(ranking, top_n), 1):
        click.echo(f"{rank:3d}. {individual_id:24s} {confidence:.4f}")


@main.command()
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--detect-model", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--threshold", default=0.25, show_default=True)
@backend_option
def detect(image_path, detect_model, threshold, backend):
    """Propose head boxes for an image (JSON lines on stdout)."""
    detector = _make_detector(backend, detect_model)
    if detector is None:
        click.echo("no detector: pass --detect-model or use --backend stub", err=True)
        sys.exit(2)
    found = detect_heads(
        detector, ImageInput.from_path(image_path), score_threshold=threshold
    )
    for d in found:
        click.echo(json.dumps({"box": d.box.to_dict(), "score": d.score}))


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Model archive to serve; defaults to the one in "
                                 "the data directory.")
@click.option("--data-dir", envvar="HERDID_DATA_DIR", required=True,
              type=click.Path(file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True)
@click.option("--detect-model", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True),
              default=None, help="Built review-ui directory to serve at /.")
@backend_option
@embed_model_option
def serve(model_path, data_dir, host, port, detect_model, ui_dir, backend,
          embed_model):
    """Run the interactive identification service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir,
        backend_factory=_make_backend_factory(backend, embed_model),
        detector=_make_detector(backend, detect_model),
        model_path=model_path,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
