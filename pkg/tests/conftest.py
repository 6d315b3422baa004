from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from graphdetect.graph import WeightedGraph, generate_graph

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def fixtures():
    return FIXTURES


def unit_pair():
    return generate_graph("path", 2)


def p3():
    return generate_graph("path", 3)


def two_pairs():
    return WeightedGraph.from_edges(4, [(0, 1), (2, 3)], directed=False)


def consensus_pair_expm():
    # expm(-[[1,-1],[-1,1]]) from the eigenpairs (0, (1,1)) and (2, (1,-1)).
    e = np.exp(-2.0)
    return 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])


@st.composite
def digraphs(draw, min_n=1, max_n=6, weighted=True):
    n = draw(st.integers(min_n, max_n))
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    keep = draw(st.lists(st.booleans(), min_size=len(arcs), max_size=len(arcs)))
    edges = []
    for (i, j), k in zip(arcs, keep):
        if k:
            w = draw(st.floats(0.1, 5.0)) if weighted else 1.0
            edges.append((i, j, w))
    return WeightedGraph(n, True, tuple(edges))


@st.composite
def undirected_graphs(draw, min_n=1, max_n=6):
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [(i, j, draw(st.floats(0.1, 5.0))) for (i, j), k in zip(pairs, keep) if k]
    return WeightedGraph.from_edges(n, edges, directed=False)


def run_golden_case(name, capsys):
    """Run ``analyze`` on a fixture from inside the fixture directory.

    Returns ``(exit_code, document_text_without_timing)``.
    """
    import json
    import os

    from graphdetect.cli import main

    cwd = os.getcwd()
    os.chdir(FIXTURES)
    try:
        capsys.readouterr()
        code = main(["analyze", "--graph", f"{name}.txt", "--dt", "0.1", "--measure", "1"])
        doc = json.loads(capsys.readouterr().out)
    finally:
        os.chdir(cwd)
    doc.pop("timing", None)
    return code, json.dumps(doc, indent=2) + "\n"


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"[{number}] {title}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[1:s.index("]")])):
            terminalreporter.write_line(line)
