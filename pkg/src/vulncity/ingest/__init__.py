"""Parsers for the two input artifacts: the SAST XML report and the code-model JSON."""

from vulncity.ingest.errors import IngestError
from vulncity.ingest.sast import Finding, SastReport, parse_sast_report
from vulncity.ingest.code_model import (
    CallEdge,
    ClassRecord,
    CodeModelDocument,
    MethodRecord,
    PackageNode,
    is_valid_method_id,
    method_id,
    parse_code_model,
)

__all__ = [
    "CallEdge",
    "ClassRecord",
    "CodeModelDocument",
    "Finding",
    "IngestError",
    "MethodRecord",
    "PackageNode",
    "SastReport",
    "is_valid_method_id",
    "method_id",
    "parse_code_model",
    "parse_sast_report",
]
