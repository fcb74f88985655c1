"""Compose a merged model plus its layout into a self-contained scene file.

The scene document is the contract between the pipeline and the viewer:
colored geometry nodes, call arcs, per-method panel content, a legend, and a
precomputed overlay index so toggling a method's call graph is a pure
visibility flip on the client. Serialization is canonical (sorted keys,
floats at 6 significant digits) and therefore byte-stable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

from vulncity import layout as layout_mod
from vulncity.city import CityModel, Severity, severity_of
from vulncity.layout import CityLayout, LayoutConfig, Rect

ARC_SAMPLES = 24
ARC_RISE_PER_METER = 0.35
ARC_MIN_CLEARANCE = 2.0
SIDE_ARC_SURFACE_GAP = 0.01
SIDE_ARC_MIN_BOW = 1.0
SELF_LOOP_RADIUS = 0.5


@dataclass(frozen=True)
class ColorRGBA:
    r: float
    g: float
    b: float
    a: float = 1.0

    def __post_init__(self) -> None:
        for channel in (self.r, self.g, self.b, self.a):
            if not 0.0 <= channel <= 1.0:
                raise ValueError(f"color component {channel} outside [0, 1]")

    def lerp(self, other: ColorRGBA, t: float) -> ColorRGBA:
        return ColorRGBA(
            self.r + (other.r - self.r) * t,
            self.g + (other.g - self.g) * t,
            self.b + (other.b - self.b) * t,
            self.a + (other.a - self.a) * t,
        )


@dataclass(frozen=True)
class GradientStop:
    t: float
    color: ColorRGBA


SEVERITY_COLORS: dict[Severity, ColorRGBA] = {
    Severity.HIGH: ColorRGBA(1.0, 0.0, 0.0),
    Severity.MEDIUM: ColorRGBA(1.0, 0.5, 0.0),
    Severity.LOW: ColorRGBA(0.0, 0.8, 0.0),
    Severity.INFO: ColorRGBA(0.0, 0.4, 1.0),
}
HIGHLIGHT_COLOR = SEVERITY_COLORS[Severity.INFO]
ARC_CALLER_COLOR = ColorRGBA(0.0, 0.4, 1.0)
ARC_CALLEE_COLOR = ColorRGBA(1.0, 1.0, 1.0)
APPLICATION_PLATFORM_COLOR = ColorRGBA(1.0, 0.0, 1.0)
DEPENDENCY_PLATFORM_COLOR = ColorRGBA(0.5, 0.5, 0.5)
BUILDING_COLOR = ColorRGBA(0.7, 0.7, 0.7)


def severity_color(severity: Severity) -> ColorRGBA:
    """Pinned color per severity class; the Info blue doubles as the
    connected-method highlight color."""
    return SEVERITY_COLORS[severity]


def arc_gradient(t: float) -> ColorRGBA:
    """Arc color at parameter t: caller end is blue, callee end is white."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    return ARC_CALLER_COLOR.lerp(ARC_CALLEE_COLOR, t)


@dataclass(frozen=True)
class BoxGeometry:
    rect: Rect
    y0: float
    y1: float


@dataclass(frozen=True)
class ArcGeometry:
    points: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class SceneNode:
    id: str
    kind: str  # Platform | Building | Floor | Arc
    geometry: BoxGeometry | ArcGeometry
    color: ColorRGBA | tuple[GradientStop, ...]
    refs: dict[str, str]
    visible_by_default: bool

    def __lt__(self, other: "SceneNode") -> bool:
        return self.id < other.id


@dataclass(frozen=True)
class PanelEntry:
    bug_type: str
    severity: str
    short_message: str
    details: str


@dataclass(frozen=True)
class PanelContent:
    method_id: str
    title: str
    loc: int
    entries: tuple[PanelEntry, ...]


@dataclass(frozen=True)
class Overlay:
    arc_node_ids: tuple[str, ...]
    highlight_floor_node_ids: tuple[str, ...]


@dataclass(frozen=True)
class LegendEntry:
    label: str
    color: ColorRGBA


@dataclass
class SceneDocument:
    metadata: dict[str, Any]
    nodes: list[SceneNode] = field(default_factory=list)
    panels: dict[str, PanelContent] = field(default_factory=dict)
    overlays: dict[str, Overlay] = field(default_factory=dict)
    legend: list[LegendEntry] = field(default_factory=list)

    def node_ids(self) -> set[str]:
        return {node.id for node in self.nodes}


@dataclass(frozen=True)
class ArcEndpoint:
    """World-space anchor data for one end of a call arc."""

    floor_rect: Rect
    floor_top: float
    floor_mid: float
    building_rect: Rect
    building_top: float


def arc_endpoint(slab: layout_mod.FloorSlab, building: layout_mod.BuildingPlacement) -> ArcEndpoint:
    return ArcEndpoint(
        floor_rect=slab.rect,
        floor_top=building.base_y + slab.y1,
        floor_mid=building.base_y + (slab.y0 + slab.y1) / 2,
        building_rect=building.rect,
        building_top=building.base_y + building.height,
    )


def arc_geometry(
    start: ArcEndpoint, end: ArcEndpoint, same_class: bool
) -> tuple[tuple[float, float, float], ...]:
    """Sampled curve from the caller floor to the callee floor.

    Cross-class edges become an overhead quadratic arc whose apex clears the
    taller building by at least ARC_MIN_CLEARANCE. Same-class edges hug the
    outward side face of the shared building instead, bowing horizontally
    away so no sample falls inside the footprint. A self edge degenerates to
    a small loop on that face.
    """
    if same_class and start == end:
        return _self_loop(start)
    if same_class:
        return _side_arc(start, end)
    return _overhead_arc(start, end)


def _overhead_arc(start: ArcEndpoint, end: ArcEndpoint) -> tuple[tuple[float, float, float], ...]:
    ax, az = start.floor_rect.center
    bx, bz = end.floor_rect.center
    p0 = (ax, start.floor_top, az)
    p1 = (bx, end.floor_top, bz)
    horizontal = math.hypot(bx - ax, bz - az)
    apex = max(start.building_top, end.building_top) + max(
        ARC_RISE_PER_METER * horizontal, ARC_MIN_CLEARANCE
    )
    control = ((ax + bx) / 2, 2 * apex - (p0[1] + p1[1]) / 2, (az + bz) / 2)
    return _sample_quadratic(p0, control, p1)


def _outward_face(rect: Rect) -> tuple[tuple[float, float], tuple[float, float]]:
    """Anchor point on the building face pointing away from the city center.

    Returns ((x, z) on the face, unit outward normal in the ground plane).
    """
    cx, cz = rect.center
    if abs(cx) >= abs(cz):
        sign = 1.0 if cx >= 0 else -1.0
        face_x = rect.x + rect.width if sign > 0 else rect.x
        return (face_x, cz), (sign, 0.0)
    sign = 1.0 if cz >= 0 else -1.0
    face_z = rect.z + rect.depth if sign > 0 else rect.z
    return (cx, face_z), (0.0, sign)


def _side_arc(start: ArcEndpoint, end: ArcEndpoint) -> tuple[tuple[float, float, float], ...]:
    (fx, fz), (nx, nz) = _outward_face(start.building_rect)
    ax = fx + nx * SIDE_ARC_SURFACE_GAP
    az = fz + nz * SIDE_ARC_SURFACE_GAP
    p0 = (ax, start.floor_mid, az)
    p1 = (ax, end.floor_mid, az)
    bow = max(SIDE_ARC_MIN_BOW, ARC_RISE_PER_METER * abs(start.floor_mid - end.floor_mid))
    control = (ax + nx * bow, (start.floor_mid + end.floor_mid) / 2, az + nz * bow)
    return _sample_quadratic(p0, control, p1)


def _self_loop(endpoint: ArcEndpoint) -> tuple[tuple[float, float, float], ...]:
    (fx, fz), (nx, nz) = _outward_face(endpoint.building_rect)
    ax = fx + nx * SIDE_ARC_SURFACE_GAP
    az = fz + nz * SIDE_ARC_SURFACE_GAP
    r = SELF_LOOP_RADIUS
    # Keep the loop bottom at or above ground for floors close to the street.
    cx, cy, cz = ax + nx * r, max(endpoint.floor_mid, r), az + nz * r
    points = []
    for i in range(ARC_SAMPLES):
        theta = 2 * math.pi * i / (ARC_SAMPLES - 1)
        out = -r * math.cos(theta)
        points.append((cx + nx * out, cy + r * math.sin(theta), cz + nz * out))
    return tuple(points)


def _sample_quadratic(
    p0: tuple[float, float, float],
    control: tuple[float, float, float],
    p1: tuple[float, float, float],
) -> tuple[tuple[float, float, float], ...]:
    points = []
    for i in range(ARC_SAMPLES):
        t = i / (ARC_SAMPLES - 1)
        u = 1 - t
        points.append(
            tuple(
                u * u * p0[axis] + 2 * u * t * control[axis] + t * t * p1[axis]
                for axis in range(3)
            )
        )
    return tuple(points)


def arc_node_id(caller: str, callee: str) -> str:
    return f"arc:{caller}=>{callee}"


def floor_node_id(mid: str) -> str:
    return f"floor:{mid}"


def highlight_node_id(mid: str) -> str:
    return f"highlight:{mid}"


def build_overlay(model: CityModel, layout: CityLayout, mid: str) -> Overlay:
    """Precompute the overlay toggled for one method: its incident call arcs
    plus highlight floors for connected methods that have no severity floor.

    Deterministic and idempotent: ids are derived purely from edge endpoints,
    so recomputing yields the identical overlay.
    """
    annotation = model.annotations[mid]
    edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for callee in annotation.out_edges:
        if (mid, callee) not in seen:
            seen.add((mid, callee))
            edges.append((mid, callee))
    for caller in annotation.in_edges:
        if (caller, mid) not in seen:
            seen.add((caller, mid))
            edges.append((caller, mid))

    highlights = []
    for caller, callee in edges:
        for connected in (caller, callee):
            if connected == mid:
                continue
            neighbor = model.annotations.get(connected)
            if neighbor is not None and neighbor.severity is None:
                highlights.append(highlight_node_id(connected))

    return Overlay(
        arc_node_ids=tuple(sorted(arc_node_id(c, e) for c, e in edges)),
        highlight_floor_node_ids=tuple(sorted(set(highlights))),
    )


def compose_scene(
    model: CityModel, layout: CityLayout, cfg: LayoutConfig, sast_tool: str = ""
) -> SceneDocument:
    """Produce the render-ready scene for a model/layout pair.

    Emits platforms (application packages magenta, dependencies gray),
    buildings, severity floors (visible), highlight floors and arcs (hidden
    until toggled), panels for every annotated method, the legend, and the
    per-method overlay index. Output is canonicalized: node list sorted by
    id, floats rounded to 6 significant digits.
    """
    nodes: list[SceneNode] = []
    index = model.method_index

    for fq, district in layout.districts.items():
        nodes.append(
            SceneNode(
                id=f"platform:{fq}",
                kind="Platform",
                geometry=BoxGeometry(
                    rect=district.rect,
                    y0=district.level * cfg.platform_thickness,
                    y1=(district.level + 1) * cfg.platform_thickness,
                ),
                color=(
                    APPLICATION_PLATFORM_COLOR
                    if model.ownership.get(fq) == "application"
                    else DEPENDENCY_PLATFORM_COLOR
                ),
                refs={"packageFq": fq},
                visible_by_default=True,
            )
        )

    for fqn, building in layout.buildings.items():
        nodes.append(
            SceneNode(
                id=f"building:{fqn}",
                kind="Building",
                geometry=BoxGeometry(
                    rect=building.rect, y0=building.base_y, y1=building.base_y + building.height
                ),
                color=BUILDING_COLOR,
                refs={"classFqn": fqn},
                visible_by_default=True,
            )
        )

    overlays: dict[str, Overlay] = {}
    panels: dict[str, PanelContent] = {}
    needed_highlights: set[str] = set()
    needed_arcs: dict[str, tuple[str, str]] = {}

    for mid in sorted(model.annotations):
        annotation = model.annotations[mid]
        site = index.get(mid)
        if site is None:
            continue

        slab = layout.floors[mid]
        building = layout.buildings[site.class_record.fqn]
        if annotation.severity is not None:
            nodes.append(
                SceneNode(
                    id=floor_node_id(mid),
                    kind="Floor",
                    geometry=BoxGeometry(
                        rect=slab.rect,
                        y0=building.base_y + slab.y0,
                        y1=building.base_y + slab.y1,
                    ),
                    color=severity_color(annotation.severity),
                    refs={"methodId": mid},
                    visible_by_default=True,
                )
            )

        overlay = build_overlay(model, layout, mid)
        overlays[mid] = overlay
        needed_highlights.update(overlay.highlight_floor_node_ids)
        for arc_id in overlay.arc_node_ids:
            caller, callee = arc_id[len("arc:"):].split("=>", 1)
            needed_arcs[arc_id] = (caller, callee)

        panels[mid] = PanelContent(
            method_id=mid,
            title=f"{site.class_record.fqn}.{site.method.name}",
            loc=site.method.loc,
            entries=tuple(
                PanelEntry(
                    bug_type=f.bug_type,
                    severity=severity_of([f]).label,
                    short_message=f.short_message,
                    details=f.details,
                )
                for f in annotation.findings
            ),
        )

    for highlight_id in sorted(needed_highlights):
        mid = highlight_id[len("highlight:"):]
        site = index[mid]
        slab = layout.floors[mid]
        building = layout.buildings[site.class_record.fqn]
        nodes.append(
            SceneNode(
                id=highlight_id,
                kind="Floor",
                geometry=BoxGeometry(
                    rect=slab.rect,
                    y0=building.base_y + slab.y0,
                    y1=building.base_y + slab.y1,
                ),
                color=HIGHLIGHT_COLOR,
                refs={"methodId": mid},
                visible_by_default=False,
            )
        )

    for arc_id in sorted(needed_arcs):
        caller, callee = needed_arcs[arc_id]
        start = _endpoint_for(model, layout, caller)
        end = _endpoint_for(model, layout, callee)
        same_class = _class_of(model, caller) == _class_of(model, callee)
        nodes.append(
            SceneNode(
                id=arc_id,
                kind="Arc",
                geometry=ArcGeometry(points=arc_geometry(start, end, same_class)),
                color=(GradientStop(0.0, ARC_CALLER_COLOR), GradientStop(1.0, ARC_CALLEE_COLOR)),
                refs={"caller": caller, "callee": callee},
                visible_by_default=False,
            )
        )

    nodes.sort()
    ids = [node.id for node in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("scene node ids are not unique")

    doc = SceneDocument(
        metadata={
            "toolVersions": {"generator": _generator_version(), "sastTool": sast_tool},
            "layout": cfg.to_dict(),
            "applicationPackagePrefixes": list(model.application_package_prefixes),
        },
        nodes=nodes,
        panels=panels,
        overlays=overlays,
        legend=_legend(),
    )
    # Round-trip through the canonical form so the in-memory document equals
    # its own parse and floats are already at serialized precision.
    return scene_from_json(scene_to_json(doc))


def _endpoint_for(model: CityModel, layout: CityLayout, mid: str) -> ArcEndpoint:
    site = model.method_index[mid]
    return arc_endpoint(layout.floors[mid], layout.buildings[site.class_record.fqn])


def _class_of(model: CityModel, mid: str) -> str:
    return model.method_index[mid].class_record.fqn


def _generator_version() -> str:
    from vulncity import __version__

    return f"vulncity {__version__}"


def _legend() -> list[LegendEntry]:
    return [
        LegendEntry("High priority finding", SEVERITY_COLORS[Severity.HIGH]),
        LegendEntry("Medium priority finding", SEVERITY_COLORS[Severity.MEDIUM]),
        LegendEntry("Low priority finding", SEVERITY_COLORS[Severity.LOW]),
        LegendEntry("Info / experimental finding", SEVERITY_COLORS[Severity.INFO]),
        LegendEntry("Connected method highlight", HIGHLIGHT_COLOR),
        LegendEntry("Application package platform", APPLICATION_PLATFORM_COLOR),
        LegendEntry("Dependency package platform", DEPENDENCY_PLATFORM_COLOR),
        LegendEntry("Class building", BUILDING_COLOR),
        LegendEntry("Call arc, caller end", ARC_CALLER_COLOR),
        LegendEntry("Call arc, callee end", ARC_CALLEE_COLOR),
    ]


# --- canonical serialization -------------------------------------------------


def scene_to_json(doc: SceneDocument) -> str:
    """Canonical single-line JSON: sorted keys, floats at 6 significant
    digits, no whitespace. Identical documents serialize to identical bytes."""
    return json.dumps(_doc_to_obj(doc), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def scene_hash(serialized: bytes | str) -> str:
    """Content hash of a serialized scene; clients must agree on it to share
    a session."""
    data = serialized.encode("utf-8") if isinstance(serialized, str) else serialized
    return hashlib.sha256(data).hexdigest()


def scene_from_json(text: str) -> SceneDocument:
    """Parse a scene file back into a structured document.

    Raises:
        ValueError: If required keys are missing or malformed.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"scene file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("scene file must be a JSON object")
    for key in ("metadata", "nodes", "panels", "overlays", "legend"):
        if key not in obj:
            raise ValueError(f"scene file missing top-level key {key!r}")

    nodes = [_node_from_obj(raw) for raw in obj["nodes"]]
    panels = {mid: _panel_from_obj(raw) for mid, raw in obj["panels"].items()}
    overlays = {
        mid: Overlay(
            arc_node_ids=tuple(raw["arcNodeIds"]),
            highlight_floor_node_ids=tuple(raw["highlightFloorNodeIds"]),
        )
        for mid, raw in obj["overlays"].items()
    }
    legend = [LegendEntry(raw["label"], _color_from_obj(raw["color"])) for raw in obj["legend"]]
    doc = SceneDocument(
        metadata=obj["metadata"], nodes=nodes, panels=panels, overlays=overlays, legend=legend
    )
    _validate_scene(doc)
    return doc


def _validate_scene(doc: SceneDocument) -> None:
    ids = [node.id for node in doc.nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("scene node ids are not unique")
    known = set(ids)
    for mid, overlay in doc.overlays.items():
        for node_id in (*overlay.arc_node_ids, *overlay.highlight_floor_node_ids):
            if node_id not in known:
                raise ValueError(f"overlay for {mid!r} references unknown node {node_id!r}")


def _round6(value: float) -> float:
    rounded = float(format(value, ".6g"))
    return 0.0 if rounded == 0.0 else rounded


def _rect_to_obj(rect: Rect) -> dict[str, float]:
    return {
        "x": _round6(rect.x),
        "z": _round6(rect.z),
        "width": _round6(rect.width),
        "depth": _round6(rect.depth),
    }


def _color_to_obj(color: ColorRGBA | tuple[GradientStop, ...]) -> dict[str, Any]:
    if isinstance(color, ColorRGBA):
        return {"r": _round6(color.r), "g": _round6(color.g), "b": _round6(color.b), "a": _round6(color.a)}
    return {
        "gradient": [{"t": _round6(stop.t), "color": _color_to_obj(stop.color)} for stop in color]
    }


def _node_to_obj(node: SceneNode) -> dict[str, Any]:
    if isinstance(node.geometry, BoxGeometry):
        geometry: dict[str, Any] = {
            "box": {
                "rect": _rect_to_obj(node.geometry.rect),
                "y0": _round6(node.geometry.y0),
                "y1": _round6(node.geometry.y1),
            }
        }
    else:
        geometry = {
            "arc": {
                "points": [[_round6(x), _round6(y), _round6(z)] for x, y, z in node.geometry.points]
            }
        }
    return {
        "id": node.id,
        "kind": node.kind,
        "geometry": geometry,
        "color": _color_to_obj(node.color),
        "refs": dict(node.refs),
        "visibleByDefault": node.visible_by_default,
    }


def _doc_to_obj(doc: SceneDocument) -> dict[str, Any]:
    return {
        "metadata": doc.metadata,
        "nodes": [_node_to_obj(node) for node in sorted(doc.nodes)],
        "panels": {
            mid: {
                "methodId": panel.method_id,
                "title": panel.title,
                "loc": panel.loc,
                "entries": [
                    {
                        "bugType": entry.bug_type,
                        "severity": entry.severity,
                        "shortMessage": entry.short_message,
                        "details": entry.details,
                    }
                    for entry in panel.entries
                ],
            }
            for mid, panel in doc.panels.items()
        },
        "overlays": {
            mid: {
                "arcNodeIds": list(overlay.arc_node_ids),
                "highlightFloorNodeIds": list(overlay.highlight_floor_node_ids),
            }
            for mid, overlay in doc.overlays.items()
        },
        "legend": [{"label": entry.label, "color": _color_to_obj(entry.color)} for entry in doc.legend],
    }


def _color_from_obj(raw: dict[str, Any]) -> ColorRGBA | tuple[GradientStop, ...]:
    if "gradient" in raw:
        return tuple(
            GradientStop(stop["t"], _color_from_obj(stop["color"])) for stop in raw["gradient"]
        )
    return ColorRGBA(raw["r"], raw["g"], raw["b"], raw["a"])


def _rect_from_obj(raw: dict[str, Any]) -> Rect:
    return Rect(raw["x"], raw["z"], raw["width"], raw["depth"])


def _node_from_obj(raw: dict[str, Any]) -> SceneNode:
    geometry_raw = raw["geometry"]
    geometry: BoxGeometry | ArcGeometry
    if "box" in geometry_raw:
        box = geometry_raw["box"]
        geometry = BoxGeometry(rect=_rect_from_obj(box["rect"]), y0=box["y0"], y1=box["y1"])
    elif "arc" in geometry_raw:
        geometry = ArcGeometry(points=tuple(tuple(p) for p in geometry_raw["arc"]["points"]))
    else:
        raise ValueError(f"node {raw.get('id')!r} has unknown geometry {sorted(geometry_raw)}")
    return SceneNode(
        id=raw["id"],
        kind=raw["kind"],
        geometry=geometry,
        color=_color_from_obj(raw["color"]),
        refs=dict(raw["refs"]),
        visible_by_default=raw["visibleByDefault"],
    )


def _panel_from_obj(raw: dict[str, Any]) -> PanelContent:
    return PanelContent(
        method_id=raw["methodId"],
        title=raw["title"],
        loc=raw["loc"],
        entries=tuple(
            PanelEntry(
                bug_type=entry["bugType"],
                severity=entry["severity"],
                short_message=entry["shortMessage"],
                details=entry["details"],
            )
            for entry in raw["entries"]
        ),
    )
