"""Local JSON-over-HTTP labeling service.

One analyst, one session: the service owns a composite pair (optical and
fused), accepts labeled pins as GeoJSON, and runs train / classify /
validate jobs against them with the exact same code paths as the CLI, so
results agree bit-for-bit. Mutations serialize through a single
non-blocking lock; a second concurrent job gets HTTP 409. Session state
(pins, models, class maps, reports) persists under <out>/service so a
restarted process resumes where it stopped.
"""

from __future__ import annotations

import contextlib
import json
import os
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .cart import CartClassifier, TrainParams, model_from_document, model_to_document
from .classify import classify_stack, render_classmap, render_composite
from .config import RunConfig
from .errors import Busy, ConfigError, IoError, PortInUse, TerrafuseError
from .raster import ClassMap, read_classmap, read_stack, write_classmap, write_stack
from .samples import SampleSet, parse_samples, serialize_samples
from .validation import (
    AccuracyReport,
    compare_report,
    report_from_json,
    report_to_json,
    report_to_obj,
)
from .workflow import (
    SOURCES,
    Composites,
    build_composites,
    draw_sample_sets,
    simulate_scene,
    train_model,
    validate_model,
)

GEOJSON_MEDIA = "application/geo+json"
_IMAGE_MEDIA = {"ppm": "image/x-portable-pixmap", "png": "image/png"}


@dataclass
class ServiceState:
    run: RunConfig
    out: Path
    composites: Composites
    truth: ClassMap
    scene_validation: SampleSet
    samples_text: str | None = None
    models: dict[str, CartClassifier] = field(default_factory=dict)
    classmaps: dict[str, ClassMap] = field(default_factory=dict)
    reports: dict[str, AccuracyReport] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def session_dir(self) -> Path:
        return self.out / "service"


def prepare_state(run: RunConfig, out: Path) -> ServiceState:
    """Load pipeline artifacts from `out`, simulating anything missing, then
    resume any stored session."""
    out = Path(out)
    scene_dir = out / "scene"
    comp_dir = out / "composites"
    have_artifacts = (comp_dir / "fused" / "stack.json").exists() and (
        scene_dir / "truth" / "classmap.json"
    ).exists()
    if have_artifacts:
        composites = Composites(
            optical=read_stack(comp_dir / "optical"),
            sar=read_stack(comp_dir / "sar"),
            fused=read_stack(comp_dir / "fused"),
        )
        truth = read_classmap(scene_dir / "truth")
        validation = parse_samples(
            (scene_dir / "samples" / "validation.geojson").read_text()
        )
    else:
        scene = simulate_scene(run)
        composites = build_composites(scene, run)
        train_pins, validation = draw_sample_sets(scene.truth, run)
        truth = scene.truth
        # persist enough for a restart to resume without resimulating
        try:
            write_stack(composites.optical, comp_dir / "optical")
            write_stack(composites.sar, comp_dir / "sar")
            write_stack(composites.fused, comp_dir / "fused")
            write_classmap(truth, scene_dir / "truth")
            samples_dir = scene_dir / "samples"
            samples_dir.mkdir(parents=True, exist_ok=True)
            (samples_dir / "train.geojson").write_text(
                serialize_samples(train_pins)
            )
            (samples_dir / "validation.geojson").write_text(
                serialize_samples(validation)
            )
        except (IoError, OSError):
            pass
    state = ServiceState(
        run=run,
        out=out,
        composites=composites,
        truth=truth,
        scene_validation=validation,
    )
    _resume_session(state)
    return state


def _resume_session(state: ServiceState) -> None:
    sd = state.session_dir
    samples_file = sd / "samples.geojson"
    if samples_file.exists():
        text = samples_file.read_text()
        parse_samples(text)
        state.samples_text = text
    for source in SOURCES:
        model_file = sd / "models" / f"{source}.json"
        if model_file.exists():
            state.models[source] = model_from_document(model_file.read_text())
        cm_dir = sd / "classmaps" / source
        if (cm_dir / "classmap.json").exists():
            state.classmaps[source] = read_classmap(cm_dir)
        report_file = sd / "reports" / f"{source}.json"
        if report_file.exists():
            state.reports[source] = report_from_json(report_file.read_text())


def _persist(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


@contextlib.contextmanager
def _job(state: ServiceState):
    if not state.lock.acquire(blocking=False):
        raise Busy("another job is running; retry when it finishes")
    try:
        yield
    finally:
        state.lock.release()


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _NotReady(message)


class _NotReady(Exception):
    pass


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="terrafuse", docs_url=None, redoc_url=None)

    @app.exception_handler(TerrafuseError)
    def _domain_error(_req: Request, exc: TerrafuseError):
        status = 409 if isinstance(exc, Busy) else 400
        return JSONResponse(
            {"error": exc.category, "message": str(exc)}, status_code=status
        )

    @app.exception_handler(_NotReady)
    def _not_ready(_req: Request, exc: _NotReady):
        return JSONResponse(
            {"error": "NotReady", "message": str(exc)}, status_code=404
        )

    @app.get("/api/meta")
    def meta():
        run = state.run
        stack = state.composites.fused
        return {
            "width": stack.width,
            "height": stack.height,
            "transform": stack.transform.to_dict(),
            "bands": {
                "optical": list(state.composites.optical.band_names),
                "sar": list(state.composites.sar.band_names),
                "fused": list(stack.band_names),
            },
            "legend": {str(k): v for k, v in sorted(state.truth.legend.items())},
            "palette": {str(k): list(v) for k, v in sorted(run.palette.items())},
            "render": {"bands": list(run.render_bands), "stretch": list(run.stretch)},
            "sources": list(SOURCES),
            "trained": {s: s in state.models for s in SOURCES},
            "classified": {s: s in state.classmaps for s in SOURCES},
            "validated": {s: s in state.reports for s in SOURCES},
            "samples_stored": state.samples_text is not None,
        }

    @app.get("/api/render/composite")
    def render_composite_endpoint(
        r: str | None = None,
        g: str | None = None,
        b: str | None = None,
        source: str = "optical",
        fmt: str = "ppm",
        lo: float | None = None,
        hi: float | None = None,
    ):
        stacks = {
            "optical": state.composites.optical,
            "sar": state.composites.sar,
            "fused": state.composites.fused,
        }
        if source not in stacks:
            raise ConfigError(
                f"source must be one of {sorted(stacks)}, got {source!r}"
            )
        if fmt not in _IMAGE_MEDIA:
            raise ConfigError(f"fmt must be ppm or png, got {fmt!r}")
        stack = stacks[source]
        d_r, d_g, d_b = state.run.render_bands
        stretch = (
            lo if lo is not None else state.run.stretch[0],
            hi if hi is not None else state.run.stretch[1],
        )
        data = render_composite(stack, (r or d_r, g or d_g, b or d_b), stretch, fmt=fmt)
        return Response(content=data, media_type=_IMAGE_MEDIA[fmt])

    @app.get("/api/render/classmap")
    def render_classmap_endpoint(source: str = "fused", fmt: str = "ppm"):
        if fmt not in _IMAGE_MEDIA:
            raise ConfigError(f"fmt must be ppm or png, got {fmt!r}")
        _require(source in state.classmaps, f"no class map for {source!r} yet")
        data = render_classmap(state.classmaps[source], state.run.palette, fmt=fmt)
        return Response(content=data, media_type=_IMAGE_MEDIA[fmt])

    @app.get("/api/samples")
    def get_samples():
        if state.samples_text is None:
            empty = SampleSet((), legend=state.truth.legend)
            return Response(content=serialize_samples(empty), media_type=GEOJSON_MEDIA)
        return Response(content=state.samples_text, media_type=GEOJSON_MEDIA)

    @app.post("/api/samples")
    async def post_samples(request: Request):
        body = await request.body()
        with _job(state):
            text = body.decode("utf-8")
            pins = parse_samples(text)
            state.samples_text = text
            _persist(state.session_dir / "samples.geojson", text)
            return {"ok": True, "count": len(pins), "class_counts": {
                str(k): v for k, v in sorted(pins.class_counts().items())
            }}

    @app.post("/api/train")
    async def train(request: Request):
        payload = await _json_body(request)
        source = _source_of(payload)
        with _job(state):
            _require(state.samples_text is not None, "no samples stored; POST /api/samples first")
            pins = parse_samples(state.samples_text)
            params = _params_of(payload, state.run.train_params)
            stack = state.composites.for_source(source)
            model = train_model(stack, pins, params)
            state.models[source] = model
            state.classmaps.pop(source, None)
            state.reports.pop(source, None)
            _persist(
                state.session_dir / "models" / f"{source}.json",
                model_to_document(model),
            )
            return {
                "ok": True,
                "source": source,
                "n_rows": len(pins),
                "params": {
                    "max_depth": params.max_depth,
                    "min_leaf_samples": params.min_leaf_samples,
                    "min_impurity_decrease": params.min_impurity_decrease,
                },
            }

    @app.post("/api/classify")
    async def classify(request: Request):
        payload = await _json_body(request)
        source = _source_of(payload)
        with _job(state):
            _require(source in state.models, f"no model for {source!r}; POST /api/train first")
            cm = classify_stack(state.models[source], state.composites.for_source(source))
            state.classmaps[source] = cm
            cm_dir = state.session_dir / "classmaps" / source
            cm_dir.parent.mkdir(parents=True, exist_ok=True)
            write_classmap(cm, cm_dir)
            return {"ok": True, "source": source}

    @app.post("/api/validate")
    async def validate(request: Request):
        payload = await _json_body(request)
        samples_ref = payload.get("samples_ref", "scene")
        if samples_ref == "scene":
            pins = state.scene_validation
        elif samples_ref == "stored":
            _require(state.samples_text is not None, "no samples stored")
            pins = parse_samples(state.samples_text)
        else:
            raise ConfigError(
                f"samples_ref must be 'scene' or 'stored', got {samples_ref!r}"
            )
        with _job(state):
            _require(bool(state.models), "no trained model; POST /api/train first")
            reports = {}
            for source, model in sorted(state.models.items()):
                report = validate_model(
                    model, state.composites.for_source(source), pins
                )
                state.reports[source] = report
                _persist(
                    state.session_dir / "reports" / f"{source}.json",
                    report_to_json(report),
                )
                reports[source] = report_to_obj(report)
            return {"ok": True, "samples_ref": samples_ref, "reports": reports}

    @app.get("/api/report/compare")
    def compare():
        for source in SOURCES:
            _require(
                source in state.reports,
                f"no validation report for {source!r}; train and validate both sources",
            )
        return compare_report(state.reports["optical"], state.reports["fused"])

    _mount_ui(app)
    return app


async def _json_body(request: Request) -> dict:
    body = await request.body()
    if not body:
        return {}
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as e:
        raise ConfigError(f"request body is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError("request body must be a JSON object")
    return payload


def _source_of(payload: dict) -> str:
    source = payload.get("source", "fused")
    if source not in SOURCES:
        raise ConfigError(f"source must be one of {list(SOURCES)}, got {source!r}")
    return source


def _params_of(payload: dict, defaults: TrainParams) -> TrainParams:
    overrides = payload.get("params") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("params must be a JSON object")
    known = {"max_depth", "min_leaf_samples", "min_impurity_decrease"}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown train params {sorted(unknown)}")
    try:
        return TrainParams(
            max_depth=int(overrides.get("max_depth", defaults.max_depth)),
            min_leaf_samples=int(
                overrides.get("min_leaf_samples", defaults.min_leaf_samples)
            ),
            min_impurity_decrease=float(
                overrides.get("min_impurity_decrease", defaults.min_impurity_decrease)
            ),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"malformed train params: {e}") from e


def _mount_ui(app: FastAPI) -> None:
    """Serve the labeling UI statics when a built frontend is around."""
    ui_dir = os.environ.get("TERRAFUSE_UI") or "frontend/dist"
    path = Path(ui_dir)
    if path.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(path), html=True), name="ui")


def bind_port(port: int) -> socket.socket:
    """Pre-bind the service port so a taken port fails cleanly."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        sock.bind(("127.0.0.1", port))
    except OSError as e:
        sock.close()
        raise PortInUse(f"port {port} is not available: {e}") from e
    sock.listen(128)
    return sock


def serve_forever(run: RunConfig, out: Path, port: int | None = None) -> None:
    import uvicorn

    port = port if port is not None else run.port
    state = prepare_state(run, out)
    app = create_app(state)
    sock = bind_port(port)
    try:
        config = uvicorn.Config(app, log_level="warning")
        uvicorn.Server(config).run(sockets=[sock])
    finally:
        sock.close()
