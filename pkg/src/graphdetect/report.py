"""Analysis pipeline and the JSON report document."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from . import __version__
from .certs import (
    PreconditionError,
    StochasticityEvidence,
    check_inf_norm_uniqueness,
    check_positivity,
    check_right_stochastic,
)
from .detectability import (
    OutputSpec,
    certify_detectability,
    certify_stabilizability,
    detectability_report,
    numeric_stabilizability,
    DetectabilityReport,
)
from .dynamics import LpvSchedule, lpv_detectability, lpv_transition
from .graph import WeightedGraph, is_strongly_connected, laplacian
from .matfun import as_matrix, expm

__all__ = ["AnalysisRequest", "ReportDocument", "analyze", "load_schema", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
TOOL_NAME = "graphdetect"


@dataclass
class AnalysisRequest:
    """One analysis job.

    ``graph`` and ``schedule`` are mutually exclusive graph sources;
    ``source`` is the echo of where the graph came from (a path or a
    generator spec string).
    """

    output: OutputSpec
    graph: WeightedGraph | None = None
    schedule: LpvSchedule | None = None
    dt: float | None = None
    b: np.ndarray | None = None
    source: str | None = None
    seed: int = 0
    trials: int = 1000

    def __post_init__(self):
        if (self.graph is None) == (self.schedule is None):
            raise ValueError("give exactly one of a graph or an LPV schedule")
        if self.graph is not None and (self.dt is None or not self.dt > 0):
            raise ValueError("dt must be positive")

    def echo(self) -> dict:
        d: dict[str, Any] = {"source": self.source,
                             "kind": "graph" if self.graph is not None else "schedule",
                             "dt": self.dt,
                             "output": self.output.to_dict(),
                             "seed": self.seed}
        if self.b is not None:
            d["b_matrix"] = as_matrix(self.b).tolist()
        return d


@dataclass
class ReportDocument:
    tool_version: str
    input: dict
    laplacian: dict
    spectral: dict
    detectability: DetectabilityReport
    stabilizability: dict | None = None
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def detectable(self) -> bool:
        return self.detectability.detectable

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool": {"name": TOOL_NAME, "version": self.tool_version},
            "input": self.input,
            "laplacian": self.laplacian,
            "spectral": self.spectral,
            "detectability": self.detectability.to_dict(),
            "stabilizability": self.stabilizability,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        return cls(
            tool_version=d["tool"]["version"],
            input=d["input"],
            laplacian=d["laplacian"],
            spectral=d["spectral"],
            detectability=DetectabilityReport.from_dict(d["detectability"]),
            stabilizability=d.get("stabilizability"),
            timing=d.get("timing", {}),
            schema_version=d["schema_version"],
        )

    def to_json(self, include_timing: bool = True) -> str:
        d = self.to_dict()
        if not include_timing:
            d.pop("timing")
        return json.dumps(d, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))

    def flat_rows(self) -> list[tuple[str, Any]]:
        """``(dotted.key, value)`` pairs for delimited output."""
        rows = []

        def walk(prefix, obj):
            if isinstance(obj, dict):
                for k, v in obj.items():
                    walk(f"{prefix}.{k}" if prefix else k, v)
            elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
                for i, v in enumerate(obj):
                    walk(f"{prefix}.{i}", v)
            else:
                rows.append((prefix, json.dumps(obj) if isinstance(obj, list) else obj))

        walk("", self.to_dict())
        return rows


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text())


def _spectral_section(m: np.ndarray, seed: int, trials: int) -> dict:
    evidence: StochasticityEvidence = check_right_stochastic(m)
    try:
        unique = check_inf_norm_uniqueness(m, trials=trials, seed=seed)
    except PreconditionError:
        unique = None
    d = evidence.to_dict()
    d["positive"] = check_positivity(m)
    d["inf_norm_unique"] = unique
    return d


def analyze(req: AnalysisRequest) -> ReportDocument:
    """Laplacian, transition matrix, spectral checks and both detectability routes."""
    start = time.perf_counter()
    if req.graph is not None:
        g = req.graph
        lap = laplacian(g)
        m = expm(-lap * req.dt).value
        c = req.output.c_matrix(g.n)
        cert = certify_detectability(g, req.output, req.dt)
        det = detectability_report(m, c, certificate=cert)
        lap_summary = {"n": g.n, "edge_count": g.edge_count, "directed": g.directed,
                       "strongly_connected": is_strongly_connected(g)}
    else:
        sched = req.schedule
        m = lpv_transition(sched)
        det = lpv_detectability(sched, req.output)
        g = None
        lap_summary = {"n": sched.n,
                       "segments": len(sched.segments),
                       "periodic": sched.periodic,
                       "edge_count": [s.graph.edge_count for s in sched.segments],
                       "strongly_connected": all(is_strongly_connected(s.graph) for s in sched.segments)}
    stab = None
    if req.b is not None:
        if g is None:
            raise ValueError("stabilizability analysis needs a single graph, not a schedule")
        applicable, ok = certify_stabilizability(g, req.b, req.dt)
        numeric, dim, modulus = numeric_stabilizability(m, req.b)
        stab = {"certificate_applicable": applicable, "certificate_stabilizable": ok,
                "numeric_stabilizable": numeric, "uncontrollable_dimension": dim,
                "max_uncontrollable_modulus": modulus}
    doc = ReportDocument(
        tool_version=__version__,
        input=req.echo(),
        laplacian=lap_summary,
        spectral=_spectral_section(m, req.seed, req.trials),
        detectability=det,
        stabilizability=stab,
    )
    doc.timing = {"elapsed_seconds": time.perf_counter() - start}
    return doc
