"""World-space geometry for the city: baseplate, squarified-treemap districts
with street spacing, building footprints and heights, method floor slabs.

All lengths are meters, the ground plane is x/z, y is up. Layout is a pure
function of its inputs; identical inputs give identical geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from vulncity.city import CityModel
from vulncity.ingest import ClassRecord, MethodRecord, PackageNode, method_id


@dataclass(frozen=True)
class Rect:
    """Axis-aligned ground rectangle; x/z is the min corner."""

    x: float
    z: float
    width: float
    depth: float

    @property
    def area(self) -> float:
        return self.width * self.depth

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.width / 2, self.z + self.depth / 2)

    @property
    def aspect(self) -> float:
        return max(self.width / self.depth, self.depth / self.width)

    def contains(self, other: Rect, tol: float = 1e-9) -> bool:
        return (
            other.x >= self.x - tol
            and other.z >= self.z - tol
            and other.x + other.width <= self.x + self.width + tol
            and other.z + other.depth <= self.z + self.depth + tol
        )

    def scaled_about_center(self, factor: float) -> Rect:
        cx, cz = self.center
        w = self.width * factor
        d = self.depth * factor
        return Rect(cx - w / 2, cz - d / 2, w, d)


@dataclass(frozen=True)
class LayoutConfig:
    """Tunable layout constants; every value must be strictly positive.

    ``street_width(level)`` narrows geometrically with nesting depth down to
    ``street_width_min``. The defaults are echoed into the scene metadata so
    a scene file records how it was produced.
    """

    area_per_line: float = 0.25
    height_per_line: float = 0.05
    street_width_base: float = 2.0
    street_width_decay: float = 0.7
    street_width_min: float = 0.5
    building_gap: float = 0.3
    widen_factor: float = 1.08
    platform_thickness: float = 0.2
    min_footprint_side: float = 0.4
    baseplate_slack: float = 1.15

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if value <= 0:
                raise ValueError(f"LayoutConfig.{name} must be strictly positive, got {value}")
        if self.widen_factor <= 1:
            raise ValueError(f"LayoutConfig.widen_factor must exceed 1, got {self.widen_factor}")

    def street_width(self, level: int) -> float:
        return max(self.street_width_base * self.street_width_decay**level, self.street_width_min)

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in sorted(self.__dataclass_fields__)}


@dataclass(frozen=True)
class DistrictPlacement:
    """cell: the exact treemap share; rect: the platform after street inset."""

    cell: Rect
    rect: Rect
    level: int


@dataclass(frozen=True)
class BuildingPlacement:
    """cell: the exact treemap share; rect: footprint after the half-gap
    inset and degenerate clamp. Area proportionality holds on cells."""

    cell: Rect
    rect: Rect
    height: float
    base_y: float


@dataclass(frozen=True)
class FloorSlab:
    """Vertical span of a method inside its building, relative to base_y.

    ``synthetic`` marks fallback slabs for methods without line info.
    """

    rect: Rect
    y0: float
    y1: float
    synthetic: bool = False


@dataclass
class CityLayout:
    baseplate: Rect
    districts: dict[str, DistrictPlacement] = field(default_factory=dict)
    buildings: dict[str, BuildingPlacement] = field(default_factory=dict)
    floors: dict[str, FloorSlab] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def worst_aspect(row_areas: list[float], side: float) -> float:
    """Worst (largest) aspect ratio in a row laid along a side of that length.

    This is the squarified-treemap acceptance criterion: a candidate item
    joins the current row only if it does not increase this value.
    """
    if not row_areas:
        raise ValueError("row must be non-empty")
    if side <= 0:
        raise ValueError("side must be positive")
    total = sum(row_areas)
    side_sq = side * side
    return max(side_sq * max(row_areas) / (total * total), (total * total) / (side_sq * min(row_areas)))


def squarify(weights: list[tuple[str, float]], rect: Rect) -> dict[str, Rect]:
    """Partition ``rect`` into one sub-rectangle per key, tiling it exactly.

    Areas are proportional to weights. Items are processed in descending
    weight order (ties broken by key ascending), rows are laid along the
    current shorter side, and an item joins the row only while it does not
    worsen the row's worst aspect ratio.
    """
    rows, rects = _squarify_full(weights, rect)
    del rows
    return rects


def squarify_rows(weights: list[tuple[str, float]], rect: Rect) -> list[list[str]]:
    """The greedy row partition squarify uses, in placement order."""
    rows, _ = _squarify_full(weights, rect)
    return rows


def _squarify_full(
    weights: list[tuple[str, float]], rect: Rect
) -> tuple[list[list[str]], dict[str, Rect]]:
    if not weights:
        raise ValueError("weights must be non-empty")
    for key, weight in weights:
        if weight <= 0:
            raise ValueError(f"weight for {key!r} must be positive, got {weight}")
    if rect.width <= 0 or rect.depth <= 0:
        raise ValueError("rect must have positive extent")

    ordered = sorted(weights, key=lambda kv: (-kv[1], kv[0]))
    total_weight = sum(w for _, w in ordered)
    scale = rect.area / total_weight
    items = [(key, weight * scale) for key, weight in ordered]

    rows: list[list[tuple[str, float]]] = []
    current: list[tuple[str, float]] = []
    remaining = rect
    side = min(remaining.width, remaining.depth)

    placed: dict[str, Rect] = {}
    for key, area in items:
        if not current:
            current = [(key, area)]
            continue
        row_areas = [a for _, a in current]
        if worst_aspect(row_areas + [area], side) <= worst_aspect(row_areas, side):
            current.append((key, area))
        else:
            remaining = _place_row(current, remaining, placed, final=False)
            rows.append(current)
            current = [(key, area)]
            side = min(remaining.width, remaining.depth)
    _place_row(current, remaining, placed, final=True)
    rows.append(current)
    return [[key for key, _ in row] for row in rows], placed


def _place_row(
    row: list[tuple[str, float]], remaining: Rect, placed: dict[str, Rect], final: bool
) -> Rect:
    """Carve one row strip from the remaining rect along its shorter side.

    Item boundaries come from cumulative area fractions so that rows tile
    with no float gaps; the final row absorbs the whole remaining extent.
    """
    row_area = sum(a for _, a in row)
    cumulative: list[float] = []
    running = 0.0
    for _, area in row:
        running += area
        cumulative.append(running)
    row_total = cumulative[-1]
    del row_area

    if remaining.width >= remaining.depth:
        # Row spans the depth; strip consumes width from the left edge.
        thickness = remaining.width if final else min(row_total / remaining.depth, remaining.width)
        start = remaining.z
        prev = start
        for (key, _), cum in zip(row, cumulative):
            boundary = start + remaining.depth * (cum / row_total)
            if cum == row_total:
                boundary = start + remaining.depth
            placed[key] = Rect(remaining.x, prev, thickness, boundary - prev)
            prev = boundary
        return Rect(remaining.x + thickness, remaining.z, remaining.width - thickness, remaining.depth)

    # Row spans the width; strip consumes depth from the near edge.
    thickness = remaining.depth if final else min(row_total / remaining.width, remaining.depth)
    start = remaining.x
    prev = start
    for (key, _), cum in zip(row, cumulative):
        boundary = start + remaining.width * (cum / row_total)
        if cum == row_total:
            boundary = start + remaining.width
        placed[key] = Rect(prev, remaining.z, boundary - prev, thickness)
        prev = boundary
    return Rect(remaining.x, remaining.z + thickness, remaining.width, remaining.depth - thickness)


def compute_baseplate(total_loc: int, cfg: LayoutConfig) -> Rect:
    """Square ground plate centered at the origin, sized by total LOC.

    side = sqrt(totalLoc * areaPerLine) * slack, clamped so even a one-line
    repository yields a usable plate.
    """
    if total_loc < 1:
        raise ValueError(f"total_loc must be at least 1, got {total_loc}")
    side = math.sqrt(total_loc * cfg.area_per_line) * cfg.baseplate_slack
    side = max(side, cfg.min_footprint_side * 2)
    return Rect(-side / 2, -side / 2, side, side)


def floor_geometry(
    method: MethodRecord,
    cls: ClassRecord,
    building: BuildingPlacement,
    cfg: LayoutConfig,
) -> FloorSlab:
    """Vertical slab for a method, positioned by its lines within the class.

    With span = class.line_span and f(line) = (line - min) / (max - min + 1),
    the slab runs from height*f(start) to height*f(end + 1). Methods without
    line info get a slab of thickness height_per_line at the building top,
    flagged synthetic. The slab rect overhangs the building footprint by
    ``widen_factor`` so it reads as a distinct floor; the overhang is capped
    at ``building_gap`` per side so it can only reach into gap or street
    space, never into a neighboring building.
    """
    rect = _widened(building.rect, cfg)
    if not method.has_lines:
        y1 = building.height
        y0 = max(0.0, y1 - cfg.height_per_line)
        return FloorSlab(rect=rect, y0=y0, y1=y1, synthetic=True)

    span_min, span_max = cls.line_span
    denominator = span_max - span_min + 1
    # Fraction first: (end + 1 - min) / denominator is exactly 1.0 for a
    # method covering the whole span, so y1 never exceeds the height.
    y0 = building.height * ((method.start_line - span_min) / denominator)
    y1 = building.height * ((method.end_line + 1 - span_min) / denominator)
    return FloorSlab(rect=rect, y0=y0, y1=y1, synthetic=False)


def layout_city(model: CityModel, cfg: LayoutConfig | None = None) -> CityLayout:
    """Compute the full city geometry for a merged model.

    Pass 1 recursively allocates district cells by package LOC and insets
    each by its level's street width; pass 2 allocates building footprints by
    class LOC inside a gap-inset class zone and extrudes them to height
    loc * height_per_line. Floor slabs are emitted for every annotated
    method. Too-small insets are reduced (never below zero) and degenerate
    footprints are clamped up to min_footprint_side, both with a warning.
    """
    if cfg is None:
        cfg = LayoutConfig()
    layout = CityLayout(baseplate=compute_baseplate(model.root.total_loc, cfg))
    _lay_package(model.root, layout.baseplate, 0, layout, cfg)

    index = model.method_index
    for mid in sorted(model.annotations):
        site = index.get(mid)
        if site is None:
            continue
        building = layout.buildings[site.class_record.fqn]
        layout.floors[mid] = floor_geometry(site.method, site.class_record, building, cfg)
        if site.method.has_lines is False:
            layout.warnings.append(f"floor for {mid} is synthetic (method has no line info)")
    return layout


_CLASS_ZONE_KEY = "c:"


def _lay_package(
    pkg: PackageNode, cell: Rect, level: int, layout: CityLayout, cfg: LayoutConfig
) -> None:
    rect = _inset(cell, cfg.street_width(level), cfg, layout.warnings, f"district {pkg.fq_name!r}")
    layout.districts[pkg.fq_name] = DistrictPlacement(cell=cell, rect=rect, level=level)

    class_loc = sum(c.loc for c in pkg.classes)
    class_zone: Rect | None = rect if class_loc else None
    if pkg.subpackages:
        weights = [(f"p:{sub.name}", float(sub.total_loc)) for sub in pkg.subpackages]
        if class_loc:
            weights.append((_CLASS_ZONE_KEY, float(class_loc)))
        cells = squarify(weights, rect)
        for sub in pkg.subpackages:
            _lay_package(sub, cells[f"p:{sub.name}"], level + 1, layout, cfg)
        class_zone = cells.get(_CLASS_ZONE_KEY)

    if class_zone is not None and pkg.classes:
        _lay_classes(pkg, class_zone, level, layout, cfg)


def _lay_classes(
    pkg: PackageNode, zone: Rect, level: int, layout: CityLayout, cfg: LayoutConfig
) -> None:
    # Half the gap insets the zone boundary, the other half each building
    # cell, so neighbors end up building_gap apart and a lone building sits
    # the full gap inside its district.
    half_gap = cfg.building_gap / 2
    inner = _inset(zone, half_gap, cfg, layout.warnings, f"class zone of {pkg.fq_name!r}")
    cells = squarify([(c.fqn, float(c.loc)) for c in pkg.classes], inner)
    base_y = (level + 1) * cfg.platform_thickness
    for cls in pkg.classes:
        cell = cells[cls.fqn]
        rect = _inset(cell, half_gap, cfg, layout.warnings, f"building {cls.fqn!r}")
        rect = _clamp_footprint(rect, cfg, layout.warnings, cls.fqn)
        layout.buildings[cls.fqn] = BuildingPlacement(
            cell=cell, rect=rect, height=cls.loc * cfg.height_per_line, base_y=base_y
        )


def _inset(rect: Rect, amount: float, cfg: LayoutConfig, warnings: list[str], label: str) -> Rect:
    """Shrink a rect on all four edges, reducing the inset if the rect is too
    small to keep at least min_footprint_side of usable space."""
    allowed = max(0.0, (min(rect.width, rect.depth) - cfg.min_footprint_side) / 2)
    applied = min(amount, allowed)
    if applied < amount:
        warnings.append(f"{label}: inset reduced from {amount:.3g} to {applied:.3g} m (rect too small)")
    return Rect(rect.x + applied, rect.z + applied, rect.width - 2 * applied, rect.depth - 2 * applied)


def _clamp_footprint(cell: Rect, cfg: LayoutConfig, warnings: list[str], fqn: str) -> Rect:
    width = cell.width
    depth = cell.depth
    if width >= cfg.min_footprint_side and depth >= cfg.min_footprint_side:
        return cell
    width = max(width, cfg.min_footprint_side)
    depth = max(depth, cfg.min_footprint_side)
    cx, cz = cell.center
    warnings.append(f"building {fqn!r}: footprint clamped up to {cfg.min_footprint_side} m minimum side")
    return Rect(cx - width / 2, cz - depth / 2, width, depth)


def _widened(rect: Rect, cfg: LayoutConfig) -> Rect:
    """Floor slab rect: the building footprint widened by widen_factor, with
    the overhang capped at building_gap per side."""
    overhang_x = min((cfg.widen_factor - 1) * rect.width / 2, cfg.building_gap)
    overhang_z = min((cfg.widen_factor - 1) * rect.depth / 2, cfg.building_gap)
    return Rect(
        rect.x - overhang_x,
        rect.z - overhang_z,
        rect.width + 2 * overhang_x,
        rect.depth + 2 * overhang_z,
    )


def building_method_ids(cls: ClassRecord) -> list[str]:
    """Canonical ids of all methods declared on a class."""
    return [method_id(cls.fqn, m.name, m.signature) for m in cls.methods]
