"""Command-line interface: ``graphdetect analyze|generate|simulate|estimate``.

Exit codes for ``analyze``: 0 detectable (certificate or numeric check),
2 not detectable, 1 input error.  Other subcommands return 0 or 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .detectability import OutputSpec
from .dynamics import ScheduleFormatError, discretize, load_schedule, simulate
from .estimation import KalmanConfig, run_estimator
from .graph import GraphFormatError, format_graph, generate_graph, parse_graph
from .matfun import MatrixFormatError, parse_matrix
from .report import AnalysisRequest, analyze

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_DETECTABLE = 2


class InputError(Exception):
    pass


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            write_atomic(out, text)
        except OSError as exc:
            raise InputError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror or exc}") from None


def _float_pair(text: str) -> tuple[float, float]:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _node_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated 1-based nodes, got {text!r}") from None


_GEN_INT_KEYS = {"n", "seed", "rows", "cols"}
_GEN_FLOAT_KEYS = {"lo", "hi", "edge_prob", "diffusivity", "spacing"}


def graph_from_generator_spec(spec: str, default_seed: int = 0):
    """Build a graph from ``kind:key=value,...`` (keys: n, seed, lo, hi, rows, cols, ...)."""
    kind, _, rest = spec.partition(":")
    kwargs: dict = {"seed": default_seed}
    lo = hi = 1.0
    directed = False
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"generator option {item!r} is not key=value")
        try:
            if key in _GEN_INT_KEYS:
                kwargs[key] = int(value)
            elif key == "lo":
                lo = float(value)
            elif key == "hi":
                hi = float(value)
            elif key in _GEN_FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "directed":
                directed = value.lower() in ("1", "true", "yes")
            else:
                raise InputError(f"unknown generator option {key!r}")
        except ValueError:
            raise InputError(f"bad value for generator option {key!r}: {value!r}") from None
    n = kwargs.pop("n", None)
    try:
        return generate_graph(kind, n, weight_range=(lo, hi), directed=directed, **kwargs)
    except (ValueError, RuntimeError) as exc:
        raise InputError(str(exc)) from None


def _load_graph(args):
    if getattr(args, "graph", None) and getattr(args, "generate", None):
        raise InputError("give either --graph or --generate, not both")
    if getattr(args, "graph", None):
        try:
            return parse_graph(_read(args.graph, "graph file")), args.graph
        except GraphFormatError as exc:
            raise InputError(f"{args.graph}: {exc}") from None
    if getattr(args, "generate", None):
        return graph_from_generator_spec(args.generate, args.seed), args.generate
    return None, None


def _load_matrix(path: str, what: str) -> np.ndarray:
    try:
        return parse_matrix(_read(path, what))
    except MatrixFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _output_spec(args, required: bool = True) -> OutputSpec | None:
    if args.measure and args.c_matrix:
        raise InputError("give either --measure or --c-matrix, not both")
    try:
        if args.c_matrix:
            return OutputSpec(matrix=_load_matrix(args.c_matrix, "output matrix"))
        if args.measure:
            return OutputSpec(measured_nodes=args.measure)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if required:
        raise InputError("an output is required: --measure or --c-matrix")
    return None


def _check_dt(args, required: bool = True):
    if args.dt is None:
        if required:
            raise InputError("--dt is required")
        return
    if not args.dt > 0:
        raise InputError("dt must be positive")


def _build_request(args, graph_path: str | None = None) -> AnalysisRequest:
    _check_dt(args, required=not args.schedule)
    out = _output_spec(args)
    b = _load_matrix(args.b_matrix, "input matrix") if args.b_matrix else None
    if args.schedule:
        if args.graph or args.generate or graph_path:
            raise InputError("give either a graph source or --schedule, not both")
        try:
            schedule = load_schedule(args.schedule)
        except OSError as exc:
            raise InputError(f"cannot read schedule {args.schedule}: {exc}") from None
        except ScheduleFormatError as exc:
            raise InputError(f"{args.schedule}: {exc}") from None
        return AnalysisRequest(out, schedule=schedule, dt=args.dt, b=b, source=args.schedule,
                               seed=args.seed, trials=args.trials)
    if graph_path is not None:
        try:
            g = parse_graph(_read(graph_path, "graph file"))
        except GraphFormatError as exc:
            raise InputError(f"{graph_path}: {exc}") from None
        source = graph_path
    else:
        g, source = _load_graph(args)
    if g is None:
        raise InputError("a graph source is required: --graph, --generate or --schedule")
    return AnalysisRequest(out, graph=g, dt=args.dt, b=b, source=source,
                           seed=args.seed, trials=args.trials)


def _render_report(doc, fmt: str) -> str:
    if fmt == "json":
        return doc.to_json()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(doc.flat_rows())
    return buf.getvalue()


def _analyze_one(args, graph_path=None):
    req = _build_request(args, graph_path)
    try:
        doc = analyze(req)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return doc


def cmd_analyze(args) -> int:
    if args.batch:
        return _analyze_batch(args)
    doc = _analyze_one(args)
    _emit(_render_report(doc, args.format), args.out)
    return EXIT_OK if doc.detectable else EXIT_NOT_DETECTABLE


def _analyze_batch(args) -> int:
    if args.graph or args.generate or args.schedule:
        raise InputError("--batch cannot be combined with another graph source")
    if not args.out:
        raise InputError("--batch needs --out <directory>")
    src = Path(args.batch)
    if not src.is_dir():
        raise InputError(f"{src} is not a directory")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in src.iterdir() if p.suffix == ".txt")
    if not files:
        raise InputError(f"no .txt graph files in {src}")
    suffix = ".json" if args.format == "json" else ".csv"

    def job(path: Path):
        try:
            doc = _analyze_one(args, str(path))
        except InputError as exc:
            return path, EXIT_INPUT_ERROR, str(exc)
        write_atomic(out_dir / (path.stem + suffix), _render_report(doc, args.format))
        code = EXIT_OK if doc.detectable else EXIT_NOT_DETECTABLE
        return path, code, "detectable" if code == EXIT_OK else "not detectable"

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(job, files))
    for path, code, message in results:
        print(f"{path.name}\t{code}\t{message}")
    codes = {code for _, code, _ in results}
    if EXIT_INPUT_ERROR in codes:
        return EXIT_INPUT_ERROR
    return EXIT_NOT_DETECTABLE if EXIT_NOT_DETECTABLE in codes else EXIT_OK


def cmd_generate(args) -> int:
    try:
        g = generate_graph(args.kind, args.n, seed=args.seed, weight_range=args.weights,
                           rows=args.rows, cols=args.cols, directed=args.directed,
                           edge_prob=args.edge_prob, diffusivity=args.diffusivity,
                           spacing=args.spacing)
    except (ValueError, RuntimeError) as exc:
        raise InputError(str(exc)) from None
    _emit(format_graph(g), args.out)
    return EXIT_OK


def _initial_state(vec, n, default, name):
    if vec is None:
        return default
    if vec.shape[0] != n:
        raise InputError(f"{name} has length {vec.shape[0]}, graph has {n} nodes")
    return vec


def cmd_simulate(args) -> int:
    g, _ = _load_graph(args)
    if g is None:
        raise InputError("a graph source is required: --graph or --generate")
    _check_dt(args)
    if args.steps < 0:
        raise InputError("steps must be >= 0")
    out = _output_spec(args, required=False)
    b = _load_matrix(args.b_matrix, "input matrix") if args.b_matrix else None
    try:
        sys_ = discretize(g, args.dt, b=b, out=out)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    e1 = np.zeros(g.n)
    e1[0] = 1.0
    x0 = _initial_state(args.x0, g.n, e1, "--x0")
    traj = simulate(sys_, x0, steps=args.steps)
    if args.format == "json":
        text = json.dumps({"t": traj.times,
                           "x": [x.tolist() for x in traj.states],
                           "y": [y.tolist() for y in traj.outputs]}, indent=2) + "\n"
    else:
        text = traj.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    out = _output_spec(args)
    if args.schedule:
        try:
            system = load_schedule(args.schedule)
        except (OSError, ScheduleFormatError) as exc:
            raise InputError(f"{args.schedule}: {exc}") from None
        n = system.n
    else:
        g, _ = _load_graph(args)
        if g is None:
            raise InputError("a graph source is required: --graph, --generate or --schedule")
        _check_dt(args)
        try:
            system = discretize(g, args.dt, out=out)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        n = g.n
    if args.steps < 1:
        raise InputError("steps must be >= 1")
    try:
        m = out.c_matrix(n).shape[0]
        cfg = KalmanConfig.isotropic(n, m, args.q, args.r, args.p0)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    true_x0 = _initial_state(args.x0, n, np.ones(n), "--x0")
    est_x0 = _initial_state(args.est_x0, n, np.zeros(n), "--est-x0")
    trace = run_estimator(system, cfg, true_x0, est_x0, args.steps, seed=args.seed, out=out)
    if args.format == "json":
        text = json.dumps({"trace_P": trace.covariance_traces, "err_norm": trace.error_norms},
                          indent=2) + "\n"
    else:
        text = trace.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def _add_graph_source(p, schedule: bool):
    p.add_argument("--graph", help="graph file (header 'n m directed|undirected', then 'i j w')")
    p.add_argument("--generate", metavar="SPEC",
                   help="generated graph, e.g. 'random:n=6,seed=7,lo=0.1,hi=5' or 'grid:rows=2,cols=3'")
    if schedule:
        p.add_argument("--schedule", help="LPV schedule JSON file")
    p.add_argument("--dt", type=float, help="sampling interval (> 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (stdout when omitted)")


def _add_output(p):
    p.add_argument("--measure", type=_node_list, help="comma-separated 1-based measured nodes")
    p.add_argument("--c-matrix", dest="c_matrix", help="output matrix file ('rows cols' then values)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphdetect",
        description="Detectability certificates and simulation for dynamics on weighted graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="certify detectability and emit a JSON report")
    _add_graph_source(p, schedule=True)
    _add_output(p)
    p.add_argument("--b-matrix", dest="b_matrix", help="input matrix file for stabilizability")
    p.add_argument("--batch", metavar="DIR", help="analyze every .txt graph in DIR; --out is a directory")
    p.add_argument("--trials", type=int, default=1000, help="random vectors for the norm check")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="write a generated graph file")
    p.add_argument("kind", choices=("path", "cycle", "complete", "grid", "diffusion1d", "random"))
    p.add_argument("--n", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", type=_float_pair, default=(1.0, 1.0), metavar="LO,HI")
    p.add_argument("--directed", action="store_true", help="one-way ring for 'cycle'")
    p.add_argument("--edge-prob", dest="edge_prob", type=float)
    p.add_argument("--diffusivity", type=float, default=1.0)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="zero-input trajectory as CSV (t, x_1..x_n, y_1..y_m)")
    _add_graph_source(p, schedule=False)
    _add_output(p)
    p.add_argument("--b-matrix", dest="b_matrix")
    p.add_argument("--x0", type=_vector, help="initial state (default e_1)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Kalman filter trace as CSV (k, trace_P, err_norm)")
    _add_graph_source(p, schedule=True)
    _add_output(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--q", type=float, default=0.01, help="process noise variance per node")
    p.add_argument("--r", type=float, default=0.01, help="measurement noise variance per output")
    p.add_argument("--p0", type=float, default=1.0, help="initial covariance per node")
    p.add_argument("--x0", type=_vector, help="true initial state (default all ones)")
    p.add_argument("--est-x0", dest="est_x0", type=_vector, help="initial estimate (default zeros)")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
