"""Merge a SAST report and a code model into one validated city model.

Findings are joined to methods via the canonical method id; packages are
classified as application or dependency code; call adjacency is built from
the non-dangling edges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

from vulncity.ingest import CodeModelDocument, Finding, PackageNode, SastReport, method_id
from vulncity.ingest.code_model import MethodSite

Ownership = Literal["application", "dependency"]

_PRIORITY_RANK = {1: 3, 2: 2, 3: 1}


class Severity(enum.IntEnum):
    """Severity classes ordered High > Medium > Low > Info."""

    INFO = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


def severity_of(findings: list[Finding]) -> Severity | None:
    """Highest severity among the findings, or None for an empty list.

    Priorities map 1 -> High, 2 -> Medium, 3 -> Low; experimental findings
    count as Info and never outrank a numeric priority.
    """
    best: Severity | None = None
    for finding in findings:
        rank = Severity.INFO if finding.experimental else Severity(_PRIORITY_RANK[finding.priority])
        if best is None or rank > best:
            best = rank
    return best


@dataclass
class MethodAnnotation:
    """Per-method merge result: bound findings, severity, call adjacency."""

    method_id: str
    findings: list[Finding] = field(default_factory=list)
    severity: Severity | None = None
    in_edges: list[str] = field(default_factory=list)
    out_edges: list[str] = field(default_factory=list)


@dataclass
class CityModel:
    """Validated merge of report and code model, ready for layout.

    ``annotations`` covers every method that either carries findings or
    participates in a non-dangling call edge; those are the methods that can
    show up as floors. Findings whose method id resolves nowhere are kept in
    ``unbound_findings``.
    """

    root: PackageNode
    annotations: dict[str, MethodAnnotation]
    ownership: dict[str, Ownership]
    unbound_findings: list[Finding]
    application_package_prefixes: list[str]

    @cached_property
    def method_index(self) -> dict[str, MethodSite]:
        index: dict[str, MethodSite] = {}
        for package in self.root.walk():
            for cls in package.classes:
                for method in cls.methods:
                    mid = method_id(cls.fqn, method.name, method.signature)
                    index[mid] = MethodSite(package.fq_name, cls, method)
        return index


def build_city_model(
    report: SastReport,
    model: CodeModelDocument,
    application_prefixes: list[str] | None = None,
) -> CityModel:
    """Join findings onto the package tree and derive per-method annotations.

    ``application_prefixes`` overrides the document's own prefix list when
    given (CLI flag). Never raises for data anomalies: unresolvable findings
    land in ``unbound_findings`` and dangling edges are ignored.
    """
    prefixes = model.application_package_prefixes if application_prefixes is None else application_prefixes
    annotations: dict[str, MethodAnnotation] = {}
    unbound: list[Finding] = []

    def annotation(mid: str) -> MethodAnnotation:
        if mid not in annotations:
            annotations[mid] = MethodAnnotation(method_id=mid)
        return annotations[mid]

    index = model.method_index
    for finding in report.findings:
        mid = method_id(finding.class_fqn, finding.method_name, finding.method_signature)
        if mid in index:
            annotation(mid).findings.append(finding)
        else:
            unbound.append(finding)

    seen_edges: set[tuple[str, str]] = set()
    for edge in model.call_edges:
        if edge.dangling:
            continue
        key = (edge.caller, edge.callee)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        annotation(edge.caller).out_edges.append(edge.callee)
        annotation(edge.callee).in_edges.append(edge.caller)

    for entry in annotations.values():
        entry.severity = severity_of(entry.findings)

    ownership = {
        package.fq_name: classify_ownership(package.fq_name, prefixes)
        for package in model.root.walk()
    }

    return CityModel(
        root=model.root,
        annotations=annotations,
        ownership=ownership,
        unbound_findings=unbound,
        application_package_prefixes=list(prefixes),
    )


def classify_ownership(package_fq: str, prefixes: list[str]) -> Ownership:
    """Application iff the fq name matches a prefix on a segment boundary."""
    for prefix in prefixes:
        if package_fq == prefix or package_fq.startswith(prefix + "."):
            return "application"
    return "dependency"
