"""Command-line pipeline: simulate, composite, train, classify, validate,
compare, render, serve.

Every stage reads a config document plus the artifacts of earlier stages
under --out, builds its own outputs in a scratch directory, and swaps them
into place only on success, so a failing stage never leaves partial
artifacts behind. Each stage directory carries a manifest with the config
hash, the seed, library versions and per-file digests; reruns with the
same config and seed are byte-identical.

Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import hashlib
import json
import platform
import shutil
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cart import model_from_document, model_to_document
from .classify import classify_stack, render_classmap, render_composite
from .config import RunConfig, config_digest, load_config_file, parse_config
from .errors import ConfigError, IoError, TerrafuseError
from .raster import read_classmap, read_stack, write_classmap, write_stack
from .samples import parse_samples, serialize_samples
from .simulate import read_collection, write_collection
from .validation import (
    compare_report,
    comparison_to_text,
    report_from_json,
    report_to_json,
    report_to_text,
)
from .workflow import (
    SOURCES,
    build_composites,
    draw_sample_sets,
    simulate_scene,
    train_model,
    validate_model,
)

MANIFEST_FORMAT = "terrafuse-manifest"

_STAGE_DIRS = {
    "simulate": "scene",
    "composite": "composites",
    "train": "models",
    "classify": "classification",
    "validate": "reports",
    "compare": "comparison",
    "render": "renders",
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(stage_dir: Path, stage: str, run: RunConfig) -> None:
    files = sorted(
        p for p in stage_dir.rglob("*") if p.is_file() and p.name != "manifest.json"
    )
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "stage": stage,
        "config_sha256": config_digest(run.effective),
        "seed": run.scene.seed,
        "versions": {
            "terrafuse": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "artifacts": {
            p.relative_to(stage_dir).as_posix(): _sha256(p) for p in files
        },
    }
    (stage_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _run_stage(stage: str, out_dir: str, run: RunConfig, build) -> None:
    """Build a stage in out/.partial-<stage>, then swap it into place."""
    out = Path(out_dir)
    partial = out / f".partial-{stage}"
    try:
        if partial.exists():
            shutil.rmtree(partial)
        partial.mkdir(parents=True)
        build(partial)
        _write_manifest(partial, stage, run)
        target = out / _STAGE_DIRS[stage]
        if target.exists():
            shutil.rmtree(target)
        partial.rename(target)
    except OSError as e:
        shutil.rmtree(partial, ignore_errors=True)
        raise IoError(f"cannot write stage outputs under {out}: {e}") from e
    except BaseException:
        shutil.rmtree(partial, ignore_errors=True)
        raise


def _fail(stage: str, err: BaseException, code: int) -> None:
    category = getattr(err, "category", type(err).__name__)
    click.echo(f"error stage={stage} category={category}: {err}", err=True)
    sys.exit(code)


def _guarded(stage: str, fn) -> None:
    try:
        fn()
    except ConfigError as e:
        _fail(stage, e, 2)
    except TerrafuseError as e:
        _fail(stage, e, 3)
    except click.ClickException:
        raise
    except Exception as e:  # noqa: BLE001 - last-resort mapping to exit 4
        _fail(stage, e, 4)


def _load_run(config_path: str, seed: int | None) -> RunConfig:
    return parse_config(load_config_file(config_path), seed_override=seed)


def _stage_options(fn):
    fn = click.option(
        "--seed", type=int, default=None, help="Override the scene seed."
    )(fn)
    fn = click.option(
        "--out",
        "out_dir",
        default="out",
        show_default=True,
        type=click.Path(file_okay=False),
        help="Artifact directory.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        required=True,
        type=click.Path(exists=False, dir_okay=False),
        help="JSON config document; {} uses the built-in defaults.",
    )(fn)
    return fn


def _read_stack_dir(out: Path, rel: str):
    return read_stack(out / rel)


def _read_model(out: Path, source: str):
    path = out / "models" / f"{source}.json"
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read model {path}; run `train` first: {e}") from e
    return model_from_document(text)


def _read_pins(path: Path):
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read samples {path}: {e}") from e
    return parse_samples(text)


@click.group()
@click.version_option(version=__version__, prog_name="terrafuse")
def main() -> None:
    """Optical + SAR fusion land-cover pipeline on synthetic scenes."""


@main.command()
@_stage_options
def simulate(config_path, out_dir, seed) -> None:
    """Generate the scene: truth map, image collections, sample pins."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        scene = simulate_scene(run)
        train_pins, validation_pins = draw_sample_sets(scene.truth, run)

        def build(partial: Path) -> None:
            write_classmap(scene.truth, partial / "truth")
            write_collection(scene.optical, partial / "optical")
            write_collection(scene.sar, partial / "sar")
            samples_dir = partial / "samples"
            samples_dir.mkdir()
            (samples_dir / "train.geojson").write_text(
                serialize_samples(train_pins)
            )
            (samples_dir / "validation.geojson").write_text(
                serialize_samples(validation_pins)
            )

        _run_stage("simulate", out_dir, run, build)

    _guarded("simulate", stage)


@main.command()
@_stage_options
def composite(config_path, out_dir, seed) -> None:
    """Filter the collections and reduce to optical, SAR and fused stacks."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        from .workflow import Scene

        scene = Scene(
            truth=read_classmap(out / "scene" / "truth"),
            optical=read_collection(out / "scene" / "optical"),
            sar=read_collection(out / "scene" / "sar"),
        )
        composites = build_composites(scene, run)

        def build(partial: Path) -> None:
            write_stack(composites.optical, partial / "optical")
            write_stack(composites.sar, partial / "sar")
            write_stack(composites.fused, partial / "fused")

        _run_stage("composite", out_dir, run, build)

    _guarded("composite", stage)


@main.command()
@_stage_options
@click.option(
    "--samples",
    "samples_path",
    default=None,
    type=click.Path(dir_okay=False),
    help="Training pin GeoJSON; defaults to the simulated training draw.",
)
def train(config_path, out_dir, seed, samples_path) -> None:
    """Train one tree per source (optical, fused) from the training pins."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        pins_file = (
            Path(samples_path)
            if samples_path
            else out / "scene" / "samples" / "train.geojson"
        )
        pins = _read_pins(pins_file)
        stacks = {s: _read_stack_dir(out, f"composites/{s}") for s in SOURCES}
        models = {
            s: train_model(stacks[s], pins, run.train_params) for s in SOURCES
        }

        def build(partial: Path) -> None:
            for s in SOURCES:
                (partial / f"{s}.json").write_text(model_to_document(models[s]))

        _run_stage("train", out_dir, run, build)

    _guarded("train", stage)


@main.command()
@_stage_options
def classify(config_path, out_dir, seed) -> None:
    """Apply the trained trees to their composites; write class maps + PPMs."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        results = {}
        for s in SOURCES:
            model = _read_model(out, s)
            stack = _read_stack_dir(out, f"composites/{s}")
            results[s] = classify_stack(model, stack)

        def build(partial: Path) -> None:
            for s in SOURCES:
                write_classmap(results[s], partial / s)
                (partial / f"{s}.ppm").write_bytes(
                    render_classmap(results[s], run.palette)
                )

        _run_stage("classify", out_dir, run, build)

    _guarded("classify", stage)


@main.command()
@_stage_options
@click.option(
    "--samples",
    "samples_path",
    default=None,
    type=click.Path(dir_okay=False),
    help="Validation pin GeoJSON; defaults to the simulated validation draw.",
)
def validate(config_path, out_dir, seed, samples_path) -> None:
    """Validate both trained trees on held-out pins; write accuracy reports."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        pins_file = (
            Path(samples_path)
            if samples_path
            else out / "scene" / "samples" / "validation.geojson"
        )
        pins = _read_pins(pins_file)
        reports = {}
        for s in SOURCES:
            model = _read_model(out, s)
            stack = _read_stack_dir(out, f"composites/{s}")
            reports[s] = validate_model(model, stack, pins)

        def build(partial: Path) -> None:
            for s in SOURCES:
                (partial / f"{s}.json").write_text(report_to_json(reports[s]))
                (partial / f"{s}.txt").write_text(
                    report_to_text(reports[s], title=f"{s} accuracy report")
                )

        _run_stage("validate", out_dir, run, build)

    _guarded("validate", stage)


@main.command()
@_stage_options
def compare(config_path, out_dir, seed) -> None:
    """Build the optical-vs-fused comparison from the validation reports."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        reports = {}
        for s in SOURCES:
            path = out / "reports" / f"{s}.json"
            try:
                text = path.read_text()
            except OSError as e:
                raise IoError(
                    f"cannot read report {path}; run `validate` first: {e}"
                ) from e
            reports[s] = report_from_json(text)
        doc = compare_report(reports["optical"], reports["fused"])

        def build(partial: Path) -> None:
            (partial / "comparison.json").write_text(
                json.dumps(doc, indent=2) + "\n"
            )
            (partial / "comparison.txt").write_text(comparison_to_text(doc))

        _run_stage("compare", out_dir, run, build)

    _guarded("compare", stage)


@main.command()
@_stage_options
def render(config_path, out_dir, seed) -> None:
    """Render preview PPMs: true-color composite, truth, any class maps."""

    def stage() -> None:
        run = _load_run(config_path, seed)
        out = Path(out_dir)
        images: dict[str, bytes] = {}
        optical = _read_stack_dir(out, "composites/optical")
        images["composite.ppm"] = render_composite(
            optical, run.render_bands, run.stretch
        )
        truth_dir = out / "scene" / "truth"
        if (truth_dir / "classmap.json").exists():
            images["truth.ppm"] = render_classmap(
                read_classmap(truth_dir), run.palette
            )
        for s in SOURCES:
            cm_dir = out / "classification" / s
            if (cm_dir / "classmap.json").exists():
                images[f"classmap_{s}.ppm"] = render_classmap(
                    read_classmap(cm_dir), run.palette
                )

        def build(partial: Path) -> None:
            for name, data in images.items():
                (partial / name).write_bytes(data)

        _run_stage("render", out_dir, run, build)

    _guarded("render", stage)


@main.command()
@_stage_options
@click.option("--port", type=int, default=None, help="Override service.port.")
def serve(config_path, out_dir, seed, port) -> None:
    """Run the local labeling service over the pipeline artifacts."""

    def stage() -> None:
        from .service import serve_forever

        run = _load_run(config_path, seed)
        serve_forever(run, Path(out_dir), port=port)

    _guarded("serve", stage)


if __name__ == "__main__":
    main()
