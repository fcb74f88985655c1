"""Command-line entry point: build a scene from inputs, inspect artifacts,
serve a session.

Exit codes are the machine contract: 0 success, 2 input/usage error,
1 internal error. Human-readable text may change between versions.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import socket
import sys
from collections import Counter
from pathlib import Path

from vulncity.city import Severity, build_city_model, severity_of
from vulncity.ingest import IngestError, parse_code_model, parse_sast_report
from vulncity.layout import LayoutConfig, layout_city
from vulncity.scene import compose_scene, scene_hash, scene_to_json

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

_LAYOUT_FLAG_FIELDS = {
    "area_per_line": "--area-per-line",
    "height_per_line": "--height-per-line",
    "street_width_base": "--street-width",
    "widen_factor": "--widen-factor",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vulncity",
        description="Build, inspect, and serve 3D code-city scenes from SAST results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="build a scene file from a SAST report and code model")
    build.add_argument("--sast", required=True, type=Path, help="SAST XML report path")
    build.add_argument("--model", required=True, type=Path, help="code-model JSON path")
    build.add_argument("-o", "--output", required=True, type=Path, help="scene file to write")
    build.add_argument(
        "--app-prefix",
        action="append",
        default=None,
        metavar="PREFIX",
        help="application package prefix; repeatable, overrides the document",
    )
    build.add_argument("--config", type=Path, default=None, help="JSON file of layout settings")
    for field_name, flag in _LAYOUT_FLAG_FIELDS.items():
        build.add_argument(flag, type=float, default=None, dest=field_name)

    inspect = sub.add_parser("inspect", help="validate artifacts and print statistics")
    inspect.add_argument("paths", nargs="+", type=Path, help="SAST XML or code-model JSON files")
    inspect.add_argument("--top", type=int, default=10, help="packages to list by size")

    serve = sub.add_parser("serve", help="serve a scene file and its realtime session endpoint")
    serve.add_argument("scene", type=Path, help="scene file produced by build")
    serve.add_argument("--listen", default="127.0.0.1:8000", help="host:port to bind")
    serve.add_argument("--room-ttl", type=float, default=300.0, help="empty-room retention (s)")
    serve.add_argument("--viewer-dir", type=Path, default=None, help="static viewer build to host")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "build":
            return _cmd_build(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
        return _cmd_serve(args)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _read_text(path: Path, what: str) -> str:
    if not path.is_file():
        raise IngestError(f"{what}: {path}: no such file")
    return path.read_text(encoding="utf-8")


def _layout_config(args: argparse.Namespace) -> LayoutConfig:
    settings: dict[str, float] = {}
    if args.config is not None:
        raw = json.loads(_read_text(args.config, "config"))
        if not isinstance(raw, dict):
            raise IngestError(f"config: {args.config}: expected a JSON object")
        known = {f.name for f in dataclasses.fields(LayoutConfig)}
        unknown = set(raw) - known
        if unknown:
            raise IngestError(f"config: unknown settings {sorted(unknown)}")
        settings.update(raw)
    for field_name in _LAYOUT_FLAG_FIELDS:
        value = getattr(args, field_name)
        if value is not None:
            settings[field_name] = value
    try:
        return LayoutConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise IngestError(f"config: {exc}") from exc


def _cmd_build(args: argparse.Namespace) -> int:
    try:
        report = parse_sast_report(_read_text(args.sast, "sast"))
    except IngestError as exc:
        raise IngestError(f"sast: {args.sast}: {exc}") from exc
    try:
        model_doc = parse_code_model(_read_text(args.model, "model"))
    except IngestError as exc:
        raise IngestError(f"model: {args.model}: {exc}") from exc

    cfg = _layout_config(args)
    model = build_city_model(report, model_doc, application_prefixes=args.app_prefix)
    layout = layout_city(model, cfg)
    tool = f"{report.tool_name} {report.tool_version}".strip()
    scene = compose_scene(model, layout, cfg, sast_tool=tool)
    serialized = scene_to_json(scene)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(serialized, encoding="utf-8")

    packages = sum(1 for _ in model.root.walk())
    classes = sum(len(pkg.classes) for pkg in model.root.walk())
    bound = len(report.findings) - len(model.unbound_findings)
    warnings = [*report.warnings, *model_doc.warnings, *layout.warnings]
    print(f"scene written: {args.output} ({len(serialized)} bytes)")
    print(f"scene hash: {scene_hash(serialized)}")
    print(
        f"packages: {packages}  classes: {classes}  "
        f"findings bound: {bound}  unbound: {len(model.unbound_findings)}"
    )
    print(f"warnings: {len(warnings)}")
    for line in warnings:
        print(f"  warning: {line}")
    return EXIT_OK


def _sniff_kind(text: str) -> str:
    stripped = text.lstrip()
    if stripped.startswith("<"):
        return "sast"
    if stripped.startswith("{"):
        return "model"
    raise IngestError("unrecognized artifact: expected XML (<...) or JSON ({...)")


def _cmd_inspect(args: argparse.Namespace) -> int:
    for path in args.paths:
        text = _read_text(path, "input")
        kind = _sniff_kind(text)
        print(f"== {path} ==")
        if kind == "sast":
            _inspect_sast(text)
        else:
            _inspect_model(text, args.top)
    return EXIT_OK


def _inspect_sast(text: str) -> None:
    report = parse_sast_report(text)
    histogram = Counter(
        severity_of([finding]).label for finding in report.findings
    )
    print(f"tool: {report.tool_name} {report.tool_version}".rstrip())
    print(f"findings: {len(report.findings)}")
    for severity in (Severity.HIGH, Severity.MEDIUM, Severity.LOW, Severity.INFO):
        print(f"  {severity.label}: {histogram.get(severity.label, 0)}")
    _print_warnings(report.warnings)


def _inspect_model(text: str, top: int) -> None:
    document = parse_code_model(text)
    packages = list(document.root.walk())
    classes = sum(len(pkg.classes) for pkg in packages)
    methods = sum(len(cls.methods) for pkg in packages for cls in pkg.classes)
    print(f"total loc: {document.root.total_loc}")
    print(f"packages: {len(packages)}  classes: {classes}  methods: {methods}")
    print(f"call edges: {len(document.call_edges)}")
    ranked = sorted(packages, key=lambda p: (-p.total_loc, p.fq_name))[:top]
    print(f"top {len(ranked)} packages by loc:")
    for pkg in ranked:
        label = pkg.fq_name if pkg.fq_name else "(root)"
        print(f"  {label}: {pkg.total_loc}")
    _print_warnings(document.warnings)


def _print_warnings(warnings: tuple[str, ...] | list[str]) -> None:
    print(f"warnings: {len(warnings)}")
    for line in warnings:
        print(f"  warning: {line}")


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port_text = listen.rpartition(":")
    if not sep or not host or not port_text.isdigit():
        raise IngestError(f"--listen must be host:port, got {listen!r}")
    return host, int(port_text)


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from vulncity.server.app import create_app, load_scene_file

    host, port = _parse_listen(args.listen)
    try:
        load_scene_file(args.scene)
    except FileNotFoundError:
        raise IngestError(f"scene: {args.scene}: no such file") from None
    except ValueError as exc:
        raise IngestError(f"scene: {args.scene}: {exc}") from None

    # Probe the port before starting the server so a busy port is an input
    # error, not an internal one.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise IngestError(f"cannot bind {args.listen}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(args.scene, room_ttl=args.room_ttl, viewer_dir=args.viewer_dir)
    print(f"serving scene {args.scene} on http://{host}:{port} (ws: /ws)")
    uvicorn.run(app, host=host, port=port, log_level="info")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
