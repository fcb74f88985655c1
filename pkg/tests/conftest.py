"""Shared fixtures: the sample pipeline run, a seeded random city generator,
and a terminal summary that prints one pass/fail line per acceptance test."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from vulncity.city import CityModel, build_city_model
from vulncity.ingest import parse_code_model, parse_sast_report
from vulncity.ingest.code_model import CallEdge, ClassRecord, CodeModelDocument, MethodRecord, PackageNode
from vulncity.ingest.sast import Finding, SastReport
from vulncity.layout import CityLayout, LayoutConfig, layout_city
from vulncity.scene import SceneDocument, compose_scene

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
MALFORMED = Path(__file__).resolve().parent / "fixtures" / "malformed"


@pytest.fixture(scope="session")
def sample_report():
    return parse_sast_report((FIXTURES / "sample" / "report.xml").read_text())


@pytest.fixture(scope="session")
def sample_document():
    return parse_code_model((FIXTURES / "sample" / "model.json").read_text())


@pytest.fixture(scope="session")
def sample_city(sample_report, sample_document) -> CityModel:
    return build_city_model(sample_report, sample_document)


@pytest.fixture(scope="session")
def sample_layout(sample_city) -> CityLayout:
    return layout_city(sample_city, LayoutConfig())


@pytest.fixture(scope="session")
def sample_scene(sample_city, sample_layout, sample_report) -> SceneDocument:
    tool = f"{sample_report.tool_name} {sample_report.tool_version}".strip()
    return compose_scene(sample_city, sample_layout, LayoutConfig(), sast_tool=tool)


@pytest.fixture(scope="session")
def mini_city() -> CityModel:
    report = parse_sast_report((FIXTURES / "mini" / "report.xml").read_text())
    document = parse_code_model((FIXTURES / "mini" / "model.json").read_text())
    return build_city_model(report, document)


# --- random city models -------------------------------------------------------

_SIGNATURES = (
    "()V",
    "(I)V",
    "()I",
    "(Ljava/lang/String;)V",
    "(Ljava/lang/String;)Ljava/lang/String;",
    "(IJ)Z",
    "([B)V",
)


def build_random_city(
    seed: int, max_packages: int = 50, max_classes: int = 300
) -> CityModel:
    """Deterministic random CityModel within the acceptance size caps.

    Every package holds at least one class so all treemap weights stay
    positive; class LOC starts at 60 so footprints never trigger the
    degenerate clamp.
    """
    rng = random.Random(seed)
    root = PackageNode(name="app", fq_name="app")
    packages = [root]
    for i in range(rng.randint(2, max_packages - 1)):
        parent = rng.choice(packages)
        if parent.fq_name.count(".") >= 3:
            parent = root
        node = PackageNode(name=f"p{i}", fq_name=f"{parent.fq_name}.p{i}")
        parent.subpackages.append(node)
        packages.append(node)

    class_budget = rng.randint(len(packages), max_classes)
    counts = {id(pkg): 1 for pkg in packages}
    for _ in range(class_budget - len(packages)):
        counts[id(rng.choice(packages))] += 1

    methods_by_class: dict[str, list[MethodRecord]] = {}
    next_class = 0
    for pkg in packages:
        for _ in range(counts[id(pkg)]):
            fqn = f"{pkg.fq_name}.C{next_class}"
            next_class += 1
            methods: list[MethodRecord] = []
            cursor = rng.randint(1, 20)
            for j in range(rng.randint(1, 5)):
                if rng.random() < 0.1:
                    methods.append(
                        MethodRecord(
                            name=f"m{j}",
                            signature=rng.choice(_SIGNATURES),
                            start_line=None,
                            end_line=None,
                            loc=rng.randint(3, 30),
                        )
                    )
                    continue
                start = cursor + rng.randint(0, 5)
                end = start + rng.randint(0, 59)
                cursor = end + rng.randint(1, 8)
                methods.append(
                    MethodRecord(
                        name=f"m{j}",
                        signature=rng.choice(_SIGNATURES),
                        start_line=start,
                        end_line=end,
                        loc=rng.randint(1, end - start + 1),
                    )
                )
            lined = [m for m in methods if m.has_lines]
            span = (
                (min(m.start_line for m in lined), max(m.end_line for m in lined))
                if lined
                else (1, 50)
            )
            pkg.classes.append(
                ClassRecord(
                    fqn=fqn,
                    loc=rng.randint(60, 300),
                    line_span=span,
                    methods=tuple(methods),
                )
            )

    def fill_total(pkg: PackageNode) -> int:
        total = sum(cls.loc for cls in pkg.classes)
        total += sum(fill_total(sub) for sub in pkg.subpackages)
        pkg.total_loc = total
        return total

    fill_total(root)

    sites = [
        (cls, method)
        for pkg in root.walk()
        for cls in pkg.classes
        for method in cls.methods
    ]
    edges: list[CallEdge] = []
    for _ in range(rng.randint(0, min(2 * len(sites), 400))):
        caller_cls, caller = rng.choice(sites)
        if rng.random() < 0.05:
            callee_cls, callee = caller_cls, caller
        else:
            callee_cls, callee = rng.choice(sites)
        edges.append(
            CallEdge(
                caller=f"{caller_cls.fqn}#{caller.name}{caller.signature}",
                callee=f"{callee_cls.fqn}#{callee.name}{callee.signature}",
            )
        )

    findings: list[Finding] = []
    for cls, method in sites:
        if rng.random() >= 0.3:
            continue
        for _ in range(rng.randint(1, 3)):
            experimental = rng.random() < 0.1
            findings.append(
                Finding(
                    bug_type=f"BUG_{rng.randint(0, 9)}",
                    category="EXPERIMENTAL" if experimental else "SECURITY",
                    priority=rng.randint(1, 3),
                    experimental=experimental,
                    class_fqn=cls.fqn,
                    method_name=method.name,
                    method_signature=method.signature,
                    start_line=method.start_line,
                    end_line=method.end_line,
                    short_message="synthetic finding",
                    details="synthetic details",
                )
            )

    report = SastReport(tool_name="spotbugs", tool_version="4.8.3", findings=findings)
    document = CodeModelDocument(
        root=root, call_edges=edges, application_package_prefixes=["app"]
    )
    return build_city_model(report, document)


# --- acceptance summary ---------------------------------------------------------

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        marker = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{marker}] {name}")
