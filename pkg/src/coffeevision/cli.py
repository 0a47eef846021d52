"""Command-line entry points for the full workflow.

convert -> crops -> fit -> order -> project -> relabel -> eval -> ripeness ->
detect -> serve. Every subcommand is a pure function of its inputs and flags:
identical inputs produce identical output bytes, and inputs are never
modified. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import annotations, autolabel, clustering, color, detectors, metrics
from . import ripeness as ripeness_mod
from . import synth as synth_mod
from .errors import CoffeeVisionError


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (CoffeeVisionError, ValueError) as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(1)


@click.group(cls=_Cli)
def main():
    """Coffee-branch photo analysis toolkit."""


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, ensure_ascii=False, separators=(",", ":")))


def _load_names(path) -> list[str] | None:
    return annotations.read_names(path) if path else None


def _ripe_set(ripe: str | None, names: list[str] | None) -> list[str]:
    if ripe:
        return [s.strip() for s in ripe.split(",") if s.strip()]
    if names:
        return [s for s in ripeness_mod.DEFAULT_RIPE_STAGES if s in names]
    return list(ripeness_mod.DEFAULT_RIPE_STAGES)


@main.command()
@click.option("--export", "export_path", required=True, type=click.Path(exists=True),
              help="Label Studio JSON-MIN export file.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for the converted label files.")
@click.option("--names", "names_path", type=click.Path(exists=True),
              help="Existing names file; unknown labels become errors.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable summary.")
def convert(export_path, out_dir, names_path, as_json):
    """Convert a Label Studio export to YOLO label files plus names.txt."""
    names = _load_names(names_path)
    files = annotations.convert_labelstudio(Path(export_path).read_bytes(), names)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for lf in files:
        annotations.save_label_file(out, lf)
    final_names = files[0].category_names if files else (names or [])
    annotations.write_names(out / "names.txt", final_names)
    if as_json:
        _echo_json({"images": len(files),
                    "boxes": sum(len(f.boxes) for f in files),
                    "names": final_names})
    else:
        click.echo(f"converted {len(files)} images, "
                   f"{sum(len(f.boxes) for f in files)} boxes -> {out}")


@main.command()
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Feature store file to write.")
@click.option("--json", "as_json", is_flag=True)
def crops(images_dir, labels_dir, out_path, as_json):
    """Extract 28x28 a*/b* crop features for every labeled box."""
    features = []
    skipped = 0
    for label in annotations.read_label_dir(labels_dir):
        image = color.load_image(autolabel.find_image(Path(images_dir), label.image_id))
        for i, box in enumerate(label.boxes):
            try:
                patch = color.crop_resize(image, box)
            except color.DegenerateBox:
                skipped += 1
                continue
            features.append(color.extract_ab(patch, label.image_id, i))
    color.save_features(out_path, features)
    if as_json:
        _echo_json({"features": len(features), "skipped": skipped, "store": str(out_path)})
    else:
        click.echo(f"extracted {len(features)} features ({skipped} skipped) -> {out_path}")


def _parse_k(value: str) -> list[int]:
    if ".." in value:
        lo, hi = value.split("..", 1)
        ks = list(range(int(lo), int(hi) + 1))
        if not ks:
            raise click.BadParameter(f"empty k range {value!r}")
        return ks
    return [int(value)]


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--k", "k_spec", default=str(clustering.DEFAULT_K), show_default=True,
              help="Cluster count, or a sweep like 2..7.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Model JSON file, or a directory in sweep mode.")
@click.option("--json", "as_json", is_flag=True)
def fit(features_path, k_spec, seed, out_path, as_json):
    """Fit k-means color models; a k sweep also writes an inertia table."""
    features = color.load_features(features_path)
    ks = _parse_k(k_spec)
    rows = []
    out = Path(out_path)
    sweep = len(ks) > 1
    if sweep:
        out.mkdir(parents=True, exist_ok=True)
    for k in ks:
        model = clustering.kmeans_fit(features, k=k, seed=seed)
        path = out / f"model_k{k}.json" if sweep else out
        clustering.save_model(path, model)
        rows.append({"k": k, "inertia": model.inertia,
                     "iterations": model.iterations_run, "model": str(path)})
    if sweep:
        table = "k,inertia,iterations\n" + "".join(
            f"{r['k']},{r['inertia']!r},{r['iterations']}\n" for r in rows)
        (out / "inertia.csv").write_text(table, encoding="utf-8")
    if as_json:
        _echo_json(rows)
    else:
        for r in rows:
            click.echo(f"k={r['k']}: inertia={r['inertia']:.3f} "
                       f"({r['iterations']} iterations) -> {r['model']}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", type=click.Path(exists=True),
              help="Reference features; with --labels enables majority-vote ordering.")
@click.option("--labels", "labels_dir", type=click.Path(exists=True),
              help="True-stage label dir matching the reference features.")
@click.option("--names", "names_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def order(model_path, features_path, labels_dir, names_path, out_path, as_json):
    """Order clusters into maturity stages and write the maturity map.

    Without reference data, clusters are ranked by ascending mean a* (green
    to red); with --features and --labels, the stage held by the majority of
    each cluster's reference samples wins.
    """
    model = clustering.load_model(model_path)
    names = _load_names(names_path)
    reference = None
    if features_path and labels_dir:
        stages_by_box = {}
        for label in annotations.read_label_dir(labels_dir):
            for i, box in enumerate(label.boxes):
                stages_by_box[(label.image_id, i)] = box.category_index
        reference = []
        for feat in color.load_features(features_path):
            key = (feat.source_image_id, feat.source_box_index)
            if key in stages_by_box:
                reference.append((feat, stages_by_box[key]))
    elif features_path or labels_dir:
        raise click.UsageError("--features and --labels must be given together")
    maturity = clustering.order_clusters(model, reference, names)
    clustering.save_maturity(out_path, maturity)
    if as_json:
        _echo_json({"cluster_to_stage": maturity.cluster_to_stage,
                    "stage_names": maturity.stage_names})
    else:
        click.echo(f"cluster->stage {maturity.cluster_to_stage} -> {out_path}")


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--maturity", "maturity_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def project(features_path, model_path, maturity_path, out_path):
    """Project features to 2-D with PCA and write x,y,cluster,stage CSV."""
    features = color.load_features(features_path)
    model = clustering.load_model(model_path)
    labels = clustering.predict_many(model, features)
    projection = clustering.pca_project(features, labels)
    maturity = clustering.load_maturity(maturity_path) if maturity_path else None
    clustering.write_pca_csv(out_path, projection, maturity)
    click.echo(f"projected {len(labels)} points -> {out_path} "
               f"(explained variance {projection.explained_variance[0]:.1f}, "
               f"{projection.explained_variance[1]:.1f})")


@main.command()
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_dir", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--maturity", "maturity_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--json", "as_json", is_flag=True)
def relabel(images_dir, labels_dir, model_path, maturity_path, out_dir, as_json):
    """Machine-label manual boxes with color-cluster maturity stages."""
    job = autolabel.RelabelJob(
        images_dir=Path(images_dir), labels_dir=Path(labels_dir),
        model=clustering.load_model(model_path),
        maturity=clustering.load_maturity(maturity_path),
        output_dir=Path(out_dir))
    summary = autolabel.relabel(job)
    if as_json:
        click.echo(summary.to_json())
    else:
        click.echo(f"relabeled {summary.boxes_relabeled} boxes in "
                   f"{summary.images_processed} images "
                   f"({summary.skipped} skipped): {summary.per_stage}")


@main.command(name="eval")
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True))
@click.option("--preds", "preds_dir", required=True, type=click.Path(exists=True))
@click.option("--names", "names_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(metrics.MODES), default="multiclass",
              show_default=True)
@click.option("--iou", "iou_thr", default=metrics.DEFAULT_IOU_THRESHOLD,
              show_default=True, type=float)
@click.option("--conf", "conf_thr", default=metrics.DEFAULT_CONFIDENCE_THRESHOLD,
              show_default=True, type=float)
@click.option("--ripe", help="Comma-separated ripe stage names for binary mode.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Also write the JSON report here.")
@click.option("--json", "as_json", is_flag=True)
def eval_cmd(gt_dir, preds_dir, names_path, mode, iou_thr, conf_thr, ripe,
             out_path, as_json):
    """Evaluate predictions against ground truth (P, R, AP@.5, mAP@.5)."""
    names = _load_names(names_path)
    labels = annotations.read_label_dir(gt_dir)
    preds = annotations.read_prediction_dir(preds_dir)
    report = metrics.evaluate(labels, preds, names, mode=mode,
                              iou_threshold=iou_thr, confidence_threshold=conf_thr,
                              ripe_stages=set(_ripe_set(ripe, names)))
    if out_path:
        Path(out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    if as_json:
        click.echo(report.to_json())
    else:
        click.echo(report.format_table(), nl=False)


@main.command(name="ripeness")
@click.option("--preds", "preds_dir", required=True, type=click.Path(exists=True))
@click.option("--dates", "dates_path", required=True, type=click.Path(exists=True),
              help="CSV with header image_id,captured_at.")
@click.option("--names", "names_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["binary", "multiclass"]),
              default="binary", show_default=True)
@click.option("--conf", "conf_thr", default=metrics.DEFAULT_CONFIDENCE_THRESHOLD,
              show_default=True, type=float)
@click.option("--ripe", help="Comma-separated ripe stage names.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write the timeline CSV here.")
@click.option("--json", "as_json", is_flag=True,
              help="Print the JSON series (the service's /timeline format).")
def ripeness_cmd(preds_dir, dates_path, names_path, mode, conf_thr, ripe,
                 out_path, as_json):
    """Compute the dated ripeness series from prediction files."""
    names = annotations.read_names(names_path)
    ripe_stages = _ripe_set(ripe, names)
    dated = []
    preds_dir = Path(preds_dir)
    for line_no, line in enumerate(
            Path(dates_path).read_text(encoding="utf-8").splitlines()):
        if line_no == 0 or not line.strip():
            continue
        image_id, captured_at = (part.strip() for part in line.split(",", 1))
        path = preds_dir / f"{image_id}.txt"
        pred = annotations.load_prediction_file(path) if path.is_file() else \
            annotations.PredictionFile(image_id=image_id)
        dated.append((captured_at,
                      ripeness_mod.counts_from_predictions(pred, names, conf_thr)))
    series = ripeness_mod.timeline_from_counts(dated, mode, ripe_stages, names)
    if out_path:
        Path(out_path).write_text(series.to_csv(), encoding="utf-8")
    if as_json:
        click.echo(series.to_json())
    elif not out_path:
        click.echo(series.to_csv(), nl=False)


@main.command()
@click.option("--images", "images_path", required=True, type=click.Path(exists=True),
              help="Image file or directory of images.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--detector", "detector_path", type=click.Path(exists=True),
              help="Detector config JSON; default is the classical baseline.")
@click.option("--json", "as_json", is_flag=True)
def detect(images_path, out_dir, detector_path, as_json):
    """Run a detector backend over images and write prediction files."""
    spec = detectors.load_detector_spec(detector_path) if detector_path \
        else detectors.default_classical_spec()
    images_path = Path(images_path)
    paths = sorted(p for p in images_path.iterdir()
                   if p.suffix in autolabel.IMAGE_SUFFIXES) \
        if images_path.is_dir() else [images_path]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    total = 0
    for path in paths:
        if spec.kind == "external":
            pred = detectors.load_external(spec.predictions_dir, path.stem)
        else:
            pred = detectors.detect_classical(color.load_image(path), spec,
                                              image_id=path.stem)
        annotations.save_prediction_file(out, pred)
        total += len(pred.entries)
    if as_json:
        _echo_json({"images": len(paths), "detections": total,
                    "stages": spec.stage_names})
    else:
        click.echo(f"detected {total} boxes in {len(paths)} images -> {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True,
              envvar="COFFEEVISION_HOST")
@click.option("--port", default=8077, show_default=True, type=int,
              envvar="COFFEEVISION_PORT")
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False),
              envvar="COFFEEVISION_DATA")
@click.option("--detector", "detector_path", type=click.Path(exists=True),
              envvar="COFFEEVISION_DETECTOR")
@click.option("--names", "names_path", type=click.Path(exists=True),
              envvar="COFFEEVISION_NAMES")
@click.option("--conf", "conf_thr", default=metrics.DEFAULT_CONFIDENCE_THRESHOLD,
              show_default=True, type=float, envvar="COFFEEVISION_CONF")
@click.option("--console", "console_dir", type=click.Path(exists=True),
              envvar="COFFEEVISION_CONSOLE",
              help="Built field-console directory to serve at /console.")
def serve(host, port, data_dir, detector_path, names_path, conf_thr, console_dir):
    """Run the harvest REST service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    names = _load_names(names_path)
    config = ServiceConfig(
        data_dir=Path(data_dir),
        detector=(detectors.load_detector_spec(detector_path) if detector_path
                  else detectors.default_classical_spec()),
        stage_names=names or list(annotations.DEFAULT_STAGE_NAMES),
        confidence_threshold=conf_thr,
        console_dir=Path(console_dir) if console_dir else None)
    uvicorn.run(create_app(config), host=host, port=port)


@main.group(hidden=True)
def synth():
    """Generate synthetic berry data (used by tests and demos)."""


@synth.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--images", "n_images", default=20, show_default=True, type=int)
@click.option("--berries", default=12, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
def dataset(out_dir, n_images, berries, seed):
    """Balanced berry dataset: images, true labels, box-only labels."""
    scenes = synth_mod.generate_dataset(out_dir, n_images, berries, seed)
    click.echo(f"wrote {len(scenes)} images to {out_dir}")


@synth.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--days", default=90, show_default=True, type=int)
@click.option("--berries", default=24, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
def season(out_dir, days, berries, seed):
    """Dated ripening season with planted-truth percentages."""
    truth = synth_mod.generate_season(out_dir, days, berries, seed)
    click.echo(f"wrote {len(truth)} dated images to {out_dir}")


if __name__ == "__main__":
    sys.exit(main())
