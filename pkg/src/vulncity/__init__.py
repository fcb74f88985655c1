"""vulncity: build explorable 3D code-city scenes from static-analysis results.

Pipeline: parse the SAST report and the code-model document, merge them into
a city model, compute the treemap layout, compose a scene file. The scene can
then be served to browser clients for collaborative exploration.
"""

__version__ = "0.1.0"

from vulncity.ingest import (
    CallEdge,
    ClassRecord,
    CodeModelDocument,
    Finding,
    IngestError,
    MethodRecord,
    PackageNode,
    SastReport,
    method_id,
    parse_code_model,
    parse_sast_report,
)
from vulncity.city import CityModel, MethodAnnotation, Severity, build_city_model, severity_of
from vulncity.layout import CityLayout, LayoutConfig, Rect, compute_baseplate, layout_city
from vulncity.scene import SceneDocument, compose_scene, scene_from_json, scene_to_json

__all__ = [
    "CallEdge",
    "CityLayout",
    "CityModel",
    "ClassRecord",
    "CodeModelDocument",
    "Finding",
    "IngestError",
    "LayoutConfig",
    "MethodAnnotation",
    "MethodRecord",
    "PackageNode",
    "Rect",
    "SastReport",
    "SceneDocument",
    "Severity",
    "build_city_model",
    "compose_scene",
    "compute_baseplate",
    "layout_city",
    "method_id",
    "parse_code_model",
    "parse_sast_report",
    "scene_from_json",
    "scene_to_json",
    "severity_of",
]
