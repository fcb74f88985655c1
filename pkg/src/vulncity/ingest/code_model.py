"""Parser for the code-model JSON artifact: package tree, class/method line
metadata, and call-graph edges.

Schema (camelCase keys):

    {
      "applicationPackagePrefixes": ["com.acme"],
      "packages": {
        "name": "com",
        "subpackages": [ ...same shape... ],
        "classes": [
          {"fqn": "com.acme.C", "loc": 30, "lineSpan": [1, 40],
           "methods": [{"name": "m", "signature": "()V",
                        "startLine": 5, "endLine": 20, "loc": 16}]}
        ]
      },
      "callEdges": [{"caller": "com.acme.C#m()V", "callee": "..."}]
    }

Package names are single segments; the root may be "" (default package).
Methods may omit startLine/endLine together, which downgrades their floor
geometry to a synthetic slab later in the pipeline.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator

from vulncity.ingest.errors import IngestError

_METHOD_ID_RE = re.compile(r"^[^#]+#[^#(]+\(.*\).+$")


def method_id(class_fqn: str, method_name: str, signature: str) -> str:
    """Canonical join key between SAST findings and code-model methods.

    Format: ``classFqn#methodName(args)ret`` with the JVM descriptor taken
    verbatim, e.g. ``a.b.C#m()V``. Injective for distinct inputs.
    """
    if not class_fqn or not method_name or not signature:
        raise ValueError("class_fqn, method_name and signature must be non-empty")
    return f"{class_fqn}#{method_name}{signature}"


def is_valid_method_id(candidate: str) -> bool:
    return bool(_METHOD_ID_RE.match(candidate))


@dataclass(frozen=True)
class MethodRecord:
    """Method metadata; line info may be absent (both ends at once)."""

    name: str
    signature: str
    start_line: int | None
    end_line: int | None
    loc: int

    @property
    def has_lines(self) -> bool:
        return self.start_line is not None and self.end_line is not None


@dataclass(frozen=True)
class ClassRecord:
    fqn: str
    loc: int
    line_span: tuple[int, int]
    methods: tuple[MethodRecord, ...]


@dataclass
class PackageNode:
    name: str
    fq_name: str
    subpackages: list[PackageNode] = field(default_factory=list)
    classes: list[ClassRecord] = field(default_factory=list)
    total_loc: int = 0

    def walk(self) -> Iterator[PackageNode]:
        """Yield this package and all descendants, depth first."""
        yield self
        for sub in self.subpackages:
            yield from sub.walk()


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    dangling: bool = False


@dataclass
class MethodSite:
    """Where a method lives: its package, class and record."""

    package_fq: str
    class_record: ClassRecord
    method: MethodRecord


@dataclass
class CodeModelDocument:
    root: PackageNode
    call_edges: list[CallEdge] = field(default_factory=list)
    application_package_prefixes: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @cached_property
    def method_index(self) -> dict[str, MethodSite]:
        """Map of canonical method id to its site in the package tree."""
        index: dict[str, MethodSite] = {}
        for package in self.root.walk():
            for cls in package.classes:
                for method in cls.methods:
                    mid = method_id(cls.fqn, method.name, method.signature)
                    index[mid] = MethodSite(package.fq_name, cls, method)
        return index


def parse_code_model(json_text: str) -> CodeModelDocument:
    """Parse and validate a code-model document.

    Raises:
        IngestError: If the JSON is malformed or violates the schema; the
            message names the offending JSON path. Dangling call edges and
            empty packages are tolerated and reported as warnings instead.
    """
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    if not isinstance(data, dict):
        raise IngestError("$: document must be a JSON object")

    prefixes = _parse_prefixes(data.get("applicationPackagePrefixes", []))

    raw_root = data.get("packages")
    if not isinstance(raw_root, dict):
        raise IngestError("packages: required and must be an object")

    warnings: list[str] = []
    seen_fqns: dict[str, str] = {}
    seen_method_ids: dict[str, str] = {}
    root = _parse_package(
        raw_root, "packages", parent_fq="", is_root=True,
        seen_fqns=seen_fqns, seen_method_ids=seen_method_ids, warnings=warnings,
    )
    if root is None:
        raise IngestError("packages: the package tree contains no classes")
    if not seen_fqns:
        raise IngestError("packages: the package tree contains no classes")

    edges = _parse_edges(data.get("callEdges", []), set(seen_method_ids), warnings)
    return CodeModelDocument(
        root=root,
        call_edges=edges,
        application_package_prefixes=prefixes,
        warnings=warnings,
    )


def _parse_prefixes(raw: Any) -> list[str]:
    if not isinstance(raw, list):
        raise IngestError("applicationPackagePrefixes: must be an array of strings")
    for i, item in enumerate(raw):
        if not isinstance(item, str) or not item:
            raise IngestError(f"applicationPackagePrefixes[{i}]: must be a non-empty string")
    return list(raw)


def _parse_package(
    raw: Any,
    path: str,
    parent_fq: str,
    is_root: bool,
    seen_fqns: dict[str, str],
    seen_method_ids: dict[str, str],
    warnings: list[str],
) -> PackageNode | None:
    if not isinstance(raw, dict):
        raise IngestError(f"{path}: package must be an object")

    name = raw.get("name")
    if not isinstance(name, str):
        raise IngestError(f"{path}.name: required and must be a string")
    if name == "" and not is_root:
        raise IngestError(f"{path}.name: only the root package may be unnamed")
    if "." in name:
        raise IngestError(f"{path}.name: {name!r} is not a single segment")

    fq = f"{parent_fq}.{name}" if parent_fq else name
    node = PackageNode(name=name, fq_name=fq)

    raw_classes = raw.get("classes", [])
    if not isinstance(raw_classes, list):
        raise IngestError(f"{path}.classes: must be an array")
    for i, raw_cls in enumerate(raw_classes):
        cls = _parse_class(raw_cls, f"{path}.classes[{i}]", seen_fqns, seen_method_ids, warnings)
        node.classes.append(cls)

    raw_subs = raw.get("subpackages", [])
    if not isinstance(raw_subs, list):
        raise IngestError(f"{path}.subpackages: must be an array")
    sibling_names: set[str] = set()
    for i, raw_sub in enumerate(raw_subs):
        sub_path = f"{path}.subpackages[{i}]"
        sub = _parse_package(
            raw_sub, sub_path, parent_fq=fq, is_root=False,
            seen_fqns=seen_fqns, seen_method_ids=seen_method_ids, warnings=warnings,
        )
        if sub is None:
            continue
        if sub.name in sibling_names:
            raise IngestError(f"{sub_path}.name: duplicate sibling package {sub.name!r}")
        sibling_names.add(sub.name)
        node.subpackages.append(sub)

    node.total_loc = sum(c.loc for c in node.classes) + sum(s.total_loc for s in node.subpackages)
    if node.total_loc == 0 and not is_root:
        warnings.append(f"package {fq!r} dropped: no classes and no non-empty subpackages")
        return None
    return node


def _parse_class(
    raw: Any,
    path: str,
    seen_fqns: dict[str, str],
    seen_method_ids: dict[str, str],
    warnings: list[str],
) -> ClassRecord:
    if not isinstance(raw, dict):
        raise IngestError(f"{path}: class must be an object")

    fqn = raw.get("fqn")
    if not isinstance(fqn, str) or not fqn:
        raise IngestError(f"{path}.fqn: required and must be a non-empty string")
    if fqn in seen_fqns:
        raise IngestError(f"{path}.fqn: duplicate class {fqn!r} (also at {seen_fqns[fqn]})")
    seen_fqns[fqn] = path

    loc = raw.get("loc")
    if not isinstance(loc, int) or isinstance(loc, bool) or loc < 1:
        raise IngestError(f"{path}.loc: must be a positive integer")

    span = raw.get("lineSpan")
    if (
        not isinstance(span, list)
        or len(span) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in span)
    ):
        raise IngestError(f"{path}.lineSpan: must be [minLine, maxLine]")
    min_line, max_line = span
    if min_line < 1 or max_line < min_line:
        raise IngestError(f"{path}.lineSpan: invalid span [{min_line}, {max_line}]")

    raw_methods = raw.get("methods", [])
    if not isinstance(raw_methods, list):
        raise IngestError(f"{path}.methods: must be an array")
    methods = []
    for i, raw_method in enumerate(raw_methods):
        method = _parse_method(raw_method, f"{path}.methods[{i}]", (min_line, max_line), warnings)
        mid = method_id(fqn, method.name, method.signature)
        if mid in seen_method_ids:
            raise IngestError(f"{path}.methods[{i}]: duplicate method id {mid!r}")
        seen_method_ids[mid] = path
        methods.append(method)

    return ClassRecord(fqn=fqn, loc=loc, line_span=(min_line, max_line), methods=tuple(methods))


def _parse_method(
    raw: Any, path: str, span: tuple[int, int], warnings: list[str]
) -> MethodRecord:
    if not isinstance(raw, dict):
        raise IngestError(f"{path}: method must be an object")

    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise IngestError(f"{path}.name: required and must be a non-empty string")
    signature = raw.get("signature")
    if not isinstance(signature, str) or not signature.startswith("(") or ")" not in signature:
        raise IngestError(f"{path}.signature: must be a JVM descriptor like '(I)V'")

    loc = raw.get("loc")
    if not isinstance(loc, int) or isinstance(loc, bool) or loc < 1:
        raise IngestError(f"{path}.loc: must be a positive integer")

    start = raw.get("startLine")
    end = raw.get("endLine")
    if start is None and end is None:
        warnings.append(f"{path}: method {name!r} has no line info; floor geometry will be synthetic")
        return MethodRecord(name=name, signature=signature, start_line=None, end_line=None, loc=loc)

    for key, value in (("startLine", start), ("endLine", end)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise IngestError(f"{path}.{key}: must be a positive integer (or omit both line keys)")
    if end < start:
        raise IngestError(f"{path}.endLine: {end} precedes startLine {start}")
    if start < span[0] or end > span[1]:
        raise IngestError(
            f"{path}: lines {start}..{end} fall outside the class lineSpan {span[0]}..{span[1]}"
        )
    return MethodRecord(name=name, signature=signature, start_line=start, end_line=end, loc=loc)


def _parse_edges(raw: Any, known_ids: set[str], warnings: list[str]) -> list[CallEdge]:
    if not isinstance(raw, list):
        raise IngestError("callEdges: must be an array")
    edges: list[CallEdge] = []
    for i, raw_edge in enumerate(raw):
        path = f"callEdges[{i}]"
        if not isinstance(raw_edge, dict):
            raise IngestError(f"{path}: edge must be an object")
        caller = raw_edge.get("caller")
        callee = raw_edge.get("callee")
        for key, value in (("caller", caller), ("callee", callee)):
            if not isinstance(value, str) or not is_valid_method_id(value):
                raise IngestError(f"{path}.{key}: not a syntactically valid method id: {value!r}")
        dangling = caller not in known_ids or callee not in known_ids
        if dangling:
            warnings.append(f"{path}: dangling edge {caller} -> {callee} (endpoint not in hierarchy)")
        if caller == callee:
            warnings.append(f"{path}: self-recursive edge on {caller}")
        edges.append(CallEdge(caller=caller, callee=callee, dangling=dangling))
    return edges
