from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vulncity.city import Severity
from vulncity.layout import LayoutConfig, Rect, layout_city
from vulncity.scene import (
    ARC_CALLEE_COLOR,
    ARC_CALLER_COLOR,
    ARC_SAMPLES,
    APPLICATION_PLATFORM_COLOR,
    BUILDING_COLOR,
    DEPENDENCY_PLATFORM_COLOR,
    HIGHLIGHT_COLOR,
    ArcEndpoint,
    ArcGeometry,
    ColorRGBA,
    arc_geometry,
    arc_gradient,
    arc_node_id,
    build_overlay,
    compose_scene,
    floor_node_id,
    highlight_node_id,
    scene_from_json,
    scene_hash,
    scene_to_json,
    severity_color,
)

Point = tuple[float, float, float]


def make_endpoint(
    x: float,
    z: float,
    floor_top: float,
    building_top: float,
    floor_mid: float | None = None,
    side: float = 1.0,
) -> ArcEndpoint:
    rect = Rect(x - side / 2, z - side / 2, side, side)
    return ArcEndpoint(
        floor_rect=rect,
        floor_top=floor_top,
        floor_mid=floor_top / 2 if floor_mid is None else floor_mid,
        building_rect=rect,
        building_top=building_top,
    )


def recovered_apex(points: tuple[Point, ...]) -> float:
    """Reconstruct the quadratic's apex (value at t=0.5) from its samples."""
    p0, p1 = points[0], points[-1]
    t = 1 / (ARC_SAMPLES - 1)
    sample_y = points[1][1]
    control_y = (sample_y - (1 - t) ** 2 * p0[1] - t**2 * p1[1]) / (2 * t * (1 - t))
    return (p0[1] + 2 * control_y + p1[1]) / 4


def inside(rect: Rect, point: Point) -> bool:
    x, _, z = point
    return rect.x < x < rect.x + rect.width and rect.z < z < rect.z + rect.depth


class TestColors:
    @pytest.mark.parametrize(
        ("severity", "expected"),
        [
            (Severity.HIGH, ColorRGBA(1.0, 0.0, 0.0)),
            (Severity.MEDIUM, ColorRGBA(1.0, 0.5, 0.0)),
            (Severity.LOW, ColorRGBA(0.0, 0.8, 0.0)),
            (Severity.INFO, ColorRGBA(0.0, 0.4, 1.0)),
        ],
    )
    def test_severity_colors(self, severity: Severity, expected: ColorRGBA) -> None:
        assert severity_color(severity) == expected

    def test_highlight_reuses_the_info_blue(self) -> None:
        assert HIGHLIGHT_COLOR == severity_color(Severity.INFO)

    def test_component_range_is_enforced(self) -> None:
        with pytest.raises(ValueError, match=r"outside \[0, 1\]"):
            ColorRGBA(1.2, 0.0, 0.0)

    def test_gradient_endpoints(self) -> None:
        assert arc_gradient(0.0) == ARC_CALLER_COLOR == ColorRGBA(0.0, 0.4, 1.0)
        assert arc_gradient(1.0) == ARC_CALLEE_COLOR == ColorRGBA(1.0, 1.0, 1.0)

    def test_gradient_midpoint(self) -> None:
        mid = arc_gradient(0.5)
        assert (mid.r, mid.g, mid.b, mid.a) == pytest.approx((0.5, 0.7, 1.0, 1.0))

    def test_gradient_rejects_out_of_range(self) -> None:
        with pytest.raises(ValueError, match="outside"):
            arc_gradient(1.5)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_gradient_is_linear_per_channel(self, t: float) -> None:
        color = arc_gradient(t)
        assert color.r == pytest.approx(t)
        assert color.g == pytest.approx(0.4 + 0.6 * t)
        assert color.b == 1.0
        assert color.a == 1.0


class TestOverheadArc:
    def test_samples_and_endpoints(self) -> None:
        start = make_endpoint(0.0, 0.0, floor_top=1.0, building_top=3.0)
        end = make_endpoint(10.0, 0.0, floor_top=2.0, building_top=5.0)
        points = arc_geometry(start, end, same_class=False)
        assert len(points) == 24
        assert points[0] == (0.0, 1.0, 0.0)
        assert points[-1] == (10.0, 2.0, 0.0)

    def test_apex_formula(self) -> None:
        start = make_endpoint(0.0, 0.0, floor_top=3.0, building_top=3.0)
        end = make_endpoint(10.0, 0.0, floor_top=5.0, building_top=5.0)
        points = arc_geometry(start, end, same_class=False)
        assert recovered_apex(points) == pytest.approx(8.5)

    def test_apex_clearance_floor_of_two_meters(self) -> None:
        start = make_endpoint(0.0, 0.0, floor_top=3.0, building_top=3.0)
        end = make_endpoint(1.0, 0.0, floor_top=3.0, building_top=3.0)
        points = arc_geometry(start, end, same_class=False)
        assert recovered_apex(points) == pytest.approx(5.0)

    def test_apex_clears_the_taller_building_even_for_low_floors(self) -> None:
        start = make_endpoint(0.0, 0.0, floor_top=0.5, building_top=6.0)
        end = make_endpoint(4.0, 0.0, floor_top=0.5, building_top=2.0)
        points = arc_geometry(start, end, same_class=False)
        assert recovered_apex(points) == pytest.approx(8.0)
        assert max(y for _, y, _ in points) >= 6.0

    def test_all_points_above_ground(self) -> None:
        start = make_endpoint(0.0, 0.0, floor_top=0.1, building_top=0.2)
        end = make_endpoint(3.0, 4.0, floor_top=0.1, building_top=0.3)
        points = arc_geometry(start, end, same_class=False)
        assert all(y >= 0.0 for _, y, _ in points)


class TestSideArc:
    def test_same_class_arc_stays_outside_the_footprint(self) -> None:
        building = make_endpoint(5.0, 0.0, floor_top=1.0, building_top=4.0, side=2.0)
        other = make_endpoint(5.0, 0.0, floor_top=3.0, building_top=4.0, side=2.0)
        points = arc_geometry(building, other, same_class=True)
        assert len(points) == 24
        assert all(not inside(building.building_rect, p) for p in points)

    def test_anchors_at_the_vertical_midpoints(self) -> None:
        start = make_endpoint(5.0, 0.0, floor_top=1.0, building_top=4.0, floor_mid=0.8, side=2.0)
        end = make_endpoint(5.0, 0.0, floor_top=3.0, building_top=4.0, floor_mid=2.6, side=2.0)
        points = arc_geometry(start, end, same_class=True)
        assert points[0][1] == pytest.approx(0.8)
        assert points[-1][1] == pytest.approx(2.6)

    def test_bows_away_from_the_outward_face(self) -> None:
        start = make_endpoint(5.0, 0.0, floor_top=1.0, building_top=4.0, side=2.0)
        end = make_endpoint(5.0, 0.0, floor_top=3.0, building_top=4.0, side=2.0)
        points = arc_geometry(start, end, same_class=True)
        face_x = 6.0  # center x=5 is the dominant axis, positive side
        assert all(x >= face_x for x, _, _ in points)
        assert max(x for x, _, _ in points) > face_x + 0.4


class TestSelfLoop:
    def test_loop_is_closed_and_sampled(self) -> None:
        endpoint = make_endpoint(5.0, 0.0, floor_top=2.0, building_top=4.0, side=2.0)
        points = arc_geometry(endpoint, endpoint, same_class=True)
        assert len(points) == 24
        assert points[0] == pytest.approx(points[-1])

    def test_loop_hangs_off_the_outward_face(self) -> None:
        endpoint = make_endpoint(5.0, 0.0, floor_top=2.0, building_top=4.0, side=2.0)
        points = arc_geometry(endpoint, endpoint, same_class=True)
        assert all(not inside(endpoint.building_rect, p) for p in points)
        span = max(x for x, _, _ in points) - min(x for x, _, _ in points)
        assert span == pytest.approx(1.0, abs=0.01)

    def test_loop_never_dips_below_ground(self) -> None:
        endpoint = make_endpoint(5.0, 0.0, floor_top=0.3, building_top=0.4, floor_mid=0.25, side=2.0)
        points = arc_geometry(endpoint, endpoint, same_class=True)
        assert all(y >= 0.0 for _, y, _ in points)


class TestBuildOverlay:
    def test_counts_arcs_per_incident_edge(self, sample_city, sample_layout) -> None:
        mid = "com.shop.core.OrderService#getOrder(I)Lcom/shop/core/Order;"
        overlay = build_overlay(sample_city, sample_layout, mid)
        assert len(overlay.arc_node_ids) == 3  # 2 in + 1 out

    def test_self_edge_yields_one_arc(self, sample_city, sample_layout) -> None:
        mid = "com.shop.db.OrderDao#deleteOrder(I)V"
        overlay = build_overlay(sample_city, sample_layout, mid)
        assert overlay.arc_node_ids == (arc_node_id(mid, mid),)

    def test_connected_method_without_severity_gets_highlight(
        self, sample_city, sample_layout
    ) -> None:
        mid = "com.shop.api.OrderController#renderOrder(I)Ljava/lang/String;"
        overlay = build_overlay(sample_city, sample_layout, mid)
        callee = "com.shop.core.OrderService#getOrder(I)Lcom/shop/core/Order;"
        assert highlight_node_id(callee) in overlay.highlight_floor_node_ids

    def test_connected_method_with_severity_floor_is_not_highlighted(
        self, sample_city, sample_layout
    ) -> None:
        mid = "com.shop.core.OrderService#getOrder(I)Lcom/shop/core/Order;"
        overlay = build_overlay(sample_city, sample_layout, mid)
        vulnerable_callee = "com.shop.db.OrderDao#findByCustomer(Ljava/lang/String;)Ljava/util/List;"
        assert highlight_node_id(vulnerable_callee) not in overlay.highlight_floor_node_ids

    def test_method_without_edges_has_empty_overlay(self, sample_city, sample_layout) -> None:
        mid = "com.shop.db.Crypto#hashToken(Ljava/lang/String;)Ljava/lang/String;"
        overlay = build_overlay(sample_city, sample_layout, mid)
        assert overlay.arc_node_ids == ()
        assert overlay.highlight_floor_node_ids == ()

    def test_overlay_is_idempotent(self, sample_city, sample_layout) -> None:
        mid = "com.shop.core.OrderService#getOrder(I)Lcom/shop/core/Order;"
        assert build_overlay(sample_city, sample_layout, mid) == build_overlay(
            sample_city, sample_layout, mid
        )


class TestComposeScene:
    def test_mini_fixture_node_census(self, mini_city) -> None:
        cfg = LayoutConfig()
        scene = compose_scene(mini_city, layout_city(mini_city, cfg), cfg)
        kinds: dict[str, int] = {}
        for node in scene.nodes:
            kinds[node.kind] = kinds.get(node.kind, 0) + 1
        assert kinds == {"Platform": 2, "Building": 3, "Floor": 2, "Arc": 1}

    def test_nodes_are_sorted_by_id(self, sample_scene) -> None:
        ids = [node.id for node in sample_scene.nodes]
        assert ids == sorted(ids)
        assert len(set(ids)) == len(ids)

    def test_severity_floors_are_visible_by_default(self, sample_scene) -> None:
        floors = [n for n in sample_scene.nodes if n.id.startswith("floor:")]
        assert floors
        assert all(n.visible_by_default for n in floors)

    def test_arcs_and_highlights_start_hidden(self, sample_scene) -> None:
        hidden = [
            n
            for n in sample_scene.nodes
            if n.id.startswith("arc:") or n.id.startswith("highlight:")
        ]
        assert hidden
        assert all(not n.visible_by_default for n in hidden)

    def test_platform_colors_follow_ownership(self, sample_scene) -> None:
        by_id = {n.id: n for n in sample_scene.nodes}
        assert by_id["platform:com.shop"].color == APPLICATION_PLATFORM_COLOR
        assert by_id["platform:org.lib"].color == DEPENDENCY_PLATFORM_COLOR
        assert by_id["building:com.shop.core.Cart"].color == BUILDING_COLOR

    def test_platforms_stack_by_nesting_level(self, sample_scene) -> None:
        by_id = {n.id: n for n in sample_scene.nodes}
        assert by_id["platform:"].geometry.y0 == 0.0
        assert by_id["platform:"].geometry.y1 == 0.2
        assert by_id["platform:com.shop.db"].geometry.y0 == pytest.approx(0.6)
        assert by_id["platform:com.shop.db"].geometry.y1 == pytest.approx(0.8)

    def test_floor_color_matches_method_severity(self, sample_city, sample_scene) -> None:
        by_id = {n.id: n for n in sample_scene.nodes}
        for mid, annotation in sample_city.annotations.items():
            if annotation.severity is None:
                continue
            node = by_id[floor_node_id(mid)]
            assert node.color == severity_color(annotation.severity)

    def test_arc_nodes_carry_the_caller_callee_gradient(self, sample_scene) -> None:
        arcs = [n for n in sample_scene.nodes if n.kind == "Arc"]
        assert arcs
        for node in arcs:
            first, last = node.color[0], node.color[-1]
            assert first.t == 0.0 and first.color == ARC_CALLER_COLOR
            assert last.t == 1.0 and last.color == ARC_CALLEE_COLOR
            assert node.refs["caller"] and node.refs["callee"]
            assert isinstance(node.geometry, ArcGeometry)
            assert len(node.geometry.points) == 24

    def test_every_annotated_method_has_a_panel(self, sample_city, sample_scene) -> None:
        assert set(sample_scene.panels) == set(sample_city.annotations)

    def test_panel_content_for_a_vulnerable_method(self, sample_scene) -> None:
        panel = sample_scene.panels[
            "com.shop.db.OrderDao#findByCustomer(Ljava/lang/String;)Ljava/util/List;"
        ]
        assert panel.title == "com.shop.db.OrderDao.findByCustomer"
        assert panel.loc == 15
        assert [e.severity for e in panel.entries] == ["High", "Low"]
        assert all(e.bug_type == "SQL_INJECTION_JDBC" for e in panel.entries)
        assert panel.entries[0].short_message == "Potential SQL injection"

    def test_overlay_ids_resolve_to_nodes(self, sample_scene) -> None:
        known = sample_scene.node_ids()
        assert sample_scene.overlays
        for overlay in sample_scene.overlays.values():
            for node_id in (*overlay.arc_node_ids, *overlay.highlight_floor_node_ids):
                assert node_id in known

    def test_legend_covers_severities_and_structure(self, sample_scene) -> None:
        labels = [entry.label for entry in sample_scene.legend]
        assert len(labels) == 10
        assert "High priority finding" in labels
        assert "Application package platform" in labels
        colors = [entry.color for entry in sample_scene.legend]
        assert severity_color(Severity.HIGH) in colors

    def test_metadata_echoes_layout_and_tool(self, sample_scene) -> None:
        metadata = sample_scene.metadata
        assert metadata["layout"] == LayoutConfig().to_dict()
        assert metadata["toolVersions"]["sastTool"] == "spotbugs 4.8.3"
        assert metadata["toolVersions"]["generator"].startswith("vulncity ")
        assert metadata["applicationPackagePrefixes"] == ["com.shop"]

    def test_unbound_findings_produce_no_nodes(self, sample_scene) -> None:
        assert not any("LegacyGateway" in node.id for node in sample_scene.nodes)

    def test_all_arc_samples_above_ground(self, sample_scene) -> None:
        for node in sample_scene.nodes:
            if node.kind != "Arc":
                continue
            assert all(y >= 0.0 for _, y, _ in node.geometry.points)


class TestSerialization:
    def test_round_trip_preserves_the_document(self, sample_scene) -> None:
        text = scene_to_json(sample_scene)
        assert scene_from_json(text) == sample_scene

    def test_serialization_is_deterministic(self, sample_scene) -> None:
        assert scene_to_json(sample_scene) == scene_to_json(sample_scene)

    def test_canonical_form_is_compact_single_line(self, sample_scene) -> None:
        import json

        text = scene_to_json(sample_scene)
        assert "\n" not in text
        recompacted = json.dumps(
            json.loads(text), sort_keys=True, separators=(",", ":"), ensure_ascii=False
        )
        assert recompacted == text

    def test_floats_use_six_significant_digits(self, sample_scene) -> None:
        text = scene_to_json(sample_scene)
        import re

        for match in re.finditer(r"-?\d+\.\d+(?:e-?\d+)?", text):
            digits = match.group().lstrip("-0.").replace(".", "")
            digits = digits.split("e")[0]
            assert len(digits) <= 6, match.group()

    def test_no_negative_zero_in_output(self, sample_scene) -> None:
        import re

        assert not re.search(r"-0\.0[,\]\}]", scene_to_json(sample_scene))

    def test_hash_is_sha256_of_the_bytes(self, sample_scene) -> None:
        import hashlib

        text = scene_to_json(sample_scene)
        assert scene_hash(text) == hashlib.sha256(text.encode("utf-8")).hexdigest()
        assert scene_hash(text.encode("utf-8")) == scene_hash(text)

    def test_missing_top_level_key_is_rejected(self) -> None:
        with pytest.raises(ValueError, match="missing top-level key 'legend'"):
            scene_from_json('{"metadata":{},"nodes":[],"panels":{},"overlays":{}}')

    def test_invalid_json_is_rejected(self) -> None:
        with pytest.raises(ValueError, match="not valid JSON"):
            scene_from_json("{")

    def test_overlay_referencing_unknown_node_is_rejected(self, sample_scene) -> None:
        import json

        obj = json.loads(scene_to_json(sample_scene))
        first = next(iter(obj["overlays"]))
        obj["overlays"][first]["arcNodeIds"] = ["arc:ghost=>ghost"]
        with pytest.raises(ValueError, match="references unknown node"):
            scene_from_json(json.dumps(obj))

    def test_duplicate_node_ids_are_rejected(self, sample_scene) -> None:
        import json

        obj = json.loads(scene_to_json(sample_scene))
        obj["nodes"].append(obj["nodes"][0])
        with pytest.raises(ValueError, match="node ids are not unique"):
            scene_from_json(json.dumps(obj))
