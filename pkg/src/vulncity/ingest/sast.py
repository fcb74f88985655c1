"""Parser for SAST reports in the SpotBugs BugCollection XML format.

Only the subset needed to place findings in the city is read: per-instance
type/priority/category, the method binding, optional source lines, messages,
and the report-level details text per bug pattern.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from vulncity.ingest.errors import IngestError


@dataclass(frozen=True)
class Finding:
    """One vulnerability bound to a method of a fully qualified class."""

    bug_type: str
    category: str
    priority: int
    experimental: bool
    class_fqn: str
    method_name: str
    method_signature: str
    start_line: int | None
    end_line: int | None
    short_message: str
    details: str


@dataclass
class SastReport:
    """Findings in document order, plus parse warnings for skipped records."""

    tool_name: str
    tool_version: str
    findings: list[Finding] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def parse_sast_report(xml_text: str) -> SastReport:
    """Parse a BugCollection XML document into a SastReport.

    A finding is produced for every BugInstance that has both a Class and a
    Method child. Malformed instances (missing binding, out-of-range priority,
    inverted line ranges) are skipped and reported in ``warnings``; only an
    unreadable document raises.

    Raises:
        IngestError: If the XML is malformed or the root element is not a
            BugCollection.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise IngestError(f"malformed XML at line {line}, column {column}: {exc.msg}") from exc

    if root.tag != "BugCollection":
        raise IngestError(f"expected BugCollection root element, found <{root.tag}>")

    pattern_details = _collect_pattern_details(root)
    report = SastReport(
        tool_name=root.get("toolName", "spotbugs"),
        tool_version=root.get("version", ""),
    )

    for index, instance in enumerate(root.iter("BugInstance")):
        finding, problem = _parse_instance(instance, index, pattern_details)
        if finding is not None:
            report.findings.append(finding)
        elif problem is not None:
            report.warnings.append(problem)
    return report


def _collect_pattern_details(root: ET.Element) -> dict[str, str]:
    details: dict[str, str] = {}
    for pattern in root.iter("BugPattern"):
        bug_type = pattern.get("type")
        node = pattern.find("Details")
        if bug_type and node is not None:
            details[bug_type] = _text(node)
    return details


def _parse_instance(
    instance: ET.Element, index: int, pattern_details: dict[str, str]
) -> tuple[Finding | None, str | None]:
    bug_type = instance.get("type", "")
    label = f"BugInstance #{index} ({bug_type or 'no type'})"

    if instance.find("Class") is None:
        return None, f"{label}: skipped, no Class element"
    method = instance.find("Method")
    if method is None:
        return None, f"{label}: skipped, no Method element"

    class_fqn = method.get("classname", "")
    method_name = method.get("name", "")
    if not class_fqn or not method_name:
        return None, f"{label}: skipped, Method element lacks classname or name"

    priority_raw = instance.get("priority", "")
    try:
        priority = int(priority_raw)
    except ValueError:
        return None, f"{label}: skipped, priority {priority_raw!r} is not an integer"
    if priority not in (1, 2, 3):
        return None, f"{label}: skipped, priority {priority} outside 1..3"

    start_line, end_line = _source_lines(method)
    if (start_line is None) != (end_line is None):
        return None, f"{label}: skipped, SourceLine has only one of start/end"
    if start_line is not None and end_line is not None:
        if start_line < 1 or end_line < start_line:
            return None, f"{label}: skipped, invalid line range {start_line}..{end_line}"

    category = instance.get("category", "")
    long_message = _text(instance.find("LongMessage"))
    details = long_message
    extra = pattern_details.get(bug_type, "")
    if extra:
        details = f"{details}\n\n{extra}" if details else extra

    finding = Finding(
        bug_type=bug_type,
        category=category,
        priority=priority,
        experimental=category.upper() == "EXPERIMENTAL",
        class_fqn=class_fqn,
        method_name=method_name,
        method_signature=method.get("signature", ""),
        start_line=start_line,
        end_line=end_line,
        short_message=_text(instance.find("ShortMessage")),
        details=details,
    )
    return finding, None


def _source_lines(method: ET.Element) -> tuple[int | None, int | None]:
    source = method.find("SourceLine")
    if source is None:
        return None, None
    return _int_attr(source, "start"), _int_attr(source, "end")


def _int_attr(element: ET.Element, name: str) -> int | None:
    raw = element.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


def _text(element: ET.Element | None) -> str:
    if element is None or element.text is None:
        return ""
    return element.text.strip()
