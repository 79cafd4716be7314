"""Batch command line: ``fullspec spectrum | verify <check> | heterophily-sweep``.

Exit codes: 0 success, 1 I/O or parse error, 2 failed precondition,
3 property violation.
"""

from __future__ import annotations

import os
import sys

if "--deterministic" in sys.argv:
    # must happen before numpy loads its BLAS
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = "1"

import argparse
import datetime
import json
import math
from pathlib import Path

import numpy as np

from . import expressivity as ex
from . import verify as vf
from .errors import DomainError, FullSpecError, ParseError, PreconditionError
from .graph import (
    Graph, Partition, complete_graph, cycle_graph, frucht_graph, generate_class_graph,
    laplacian, laplacian_kind, load_edge_list, path_graph, random_graph,
)
from .filters import apply_full_spectrum_eigen, tabulate
from .heterophily import heterophily_sweep, median_energy
from .linalg import eigendecompose, eigenvalue_groups, format_float, is_simple_spectrum

EXIT_OK, EXIT_IO, EXIT_PRECONDITION, EXIT_VIOLATION = 0, 1, 2, 3

CHECKS = ("lemma1", "prop1", "prop2", "prop3", "rank1", "thm1", "thm2", "thm3", "wlspec",
          "wlsep", "jensen", "opconv", "hdasym", "limitedex", "energy")

DEFAULTS = {
    "laplacian": None,
    "seed": 0,
    "out": None,
    "deterministic": False,
    "K": None,
    "trials": 20,
    "graphs": None,
    "n": None,
    "rounds": None,
    "dims": None,
    "seeds": None,
    "h_grid": "0.1,0.3,0.5,0.7,0.9",
    "deltas": "0.25",
    "sizes": None,
    "avg_degree": 8.0,
    "dim": 128,
    "tau": 1.0,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# output


def to_json_text(obj) -> str:
    """JSON with every float written as ``%.17g``."""
    def enc(x, indent):
        pad = "  " * (indent + 1)
        end = "  " * indent
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, indent + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, (list, tuple)):
            if not x:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, indent + 1) for v in x) + "\n" + end + "]"
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if math.isnan(x):
                return '"nan"'
            if math.isinf(x):
                return '"inf"' if x > 0 else '"-inf"'
            return format_float(x)
        if x is None:
            return "null"
        return json.dumps(str(x))
    return enc(obj, 0) + "\n"


def csv_text(header, rows, deterministic: bool) -> str:
    lines = []
    if not deterministic:
        lines.append(f"# generated {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


def emit(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def emit_report(args, name: str, report: dict) -> None:
    if not args.deterministic:
        report = dict(report, generated=datetime.datetime.now(datetime.timezone.utc).isoformat())
    text = to_json_text(report)
    if args.out:
        emit(args, name, text)
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# graph sources


def parse_generate(spec: str, seed: int) -> Graph:
    """``name[:key=value,...]`` for path, cycle, complete, frucht, random and sbm.

    ``sbm`` takes ``sizes=20x20x20`` (or ``classes=8,size=20``), ``h`` and ``deg``.
    """
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ParseError(f"generator parameter {item!r} is not key=value")
        params[key.strip()] = val.strip()
    try:
        if name == "path":
            return path_graph(int(params["n"]))
        if name == "cycle":
            return cycle_graph(int(params["n"]))
        if name == "complete":
            return complete_graph(int(params["n"]))
        if name == "frucht":
            return frucht_graph()
        if name == "random":
            return random_graph(int(params["n"]), float(params.get("p", 0.5)),
                                int(params.get("seed", seed)),
                                connected=params.get("connected", "0") in ("1", "true"))
        if name == "sbm":
            part = Partition.from_sizes(parse_sizes(params))
            g, _ = generate_class_graph(part, float(params.get("h", 0.5)),
                                        float(params.get("deg", 8)), int(params.get("seed", seed)))
            return g
    except KeyError as exc:
        raise ParseError(f"generator {name!r} needs parameter {exc}") from None
    except ValueError as exc:
        if isinstance(exc, FullSpecError):
            raise
        raise ParseError(f"bad generator parameter in {spec!r}: {exc}") from None
    raise ParseError(f"unknown generator {name!r}")


def parse_sizes(params) -> list:
    if "sizes" in params:
        return [int(x) for x in str(params["sizes"]).split("x")]
    return [int(params.get("size", 20))] * int(params["classes"])


def load_graph(args):
    if getattr(args, "graph", None):
        path = Path(args.graph)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            try:
                return Graph.from_json(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from None
        return load_edge_list(text)
    if getattr(args, "generate", None):
        return parse_generate(args.generate, args.seed)
    return None


def parse_floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    vals = [x for x in str(text).split(",") if x.strip()]
    try:
        return [float(x) for x in vals]
    except ValueError:
        raise ParseError(f"expected comma-separated numbers, got {text!r}") from None


def parse_ints(text) -> list:
    return [int(round(x)) for x in parse_floats(text)]


# --------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    g = load_graph(args)
    if g is None:
        raise ParseError("spectrum needs --graph or --generate")
    kind = laplacian_kind(args.laplacian or "combinatorial")
    s = eigendecompose(laplacian(g, kind), kind=kind)
    emit(args, "spectrum.csv", csv_text(["eigenvalue"], [(float(x),) for x in s.eigenvalues],
                                       args.deterministic))
    zero = sum(1 for x in s.eigenvalues if abs(x) <= 1e-8 * max(1.0, abs(s.eigenvalues[-1])))
    summary = {"n": g.n, "laplacian": kind, "simple": is_simple_spectrum(s),
               "multiplicities": [len(grp) for grp in eigenvalue_groups(s)],
               "zero_multiplicity": zero, "components": g.n_components()}
    if args.out:
        emit(args, "spectrum.json", to_json_text(summary))
    sys.stderr.write(to_json_text(summary))
    return EXIT_OK


def _graphs_for(args, default_count: int, default_n: int, labels: int = 0):
    g = load_graph(args)
    if g is not None:
        return [g]
    return vf.random_test_graphs(args.graphs or default_count, args.n or default_n, args.seed,
                                 labels=labels)


def _Ks(args, default):
    return parse_ints(args.K) if args.K is not None else list(default)


def run_check(args):
    """Dispatch ``verify``; returns ``(report, extra_files)``."""
    check = args.check
    kind = args.laplacian
    extra = {}
    if check == "lemma1":
        rep = vf.verify_kron_identities(seed=args.seed)
    elif check == "prop1":
        rep = vf.verify_route_equivalence(seed=args.seed)
    elif check == "prop2":
        rep = vf.verify_diag_embed(seed=args.seed)
    elif check == "prop3":
        rep = vf.verify_rank_law(seed=args.seed)
    elif check == "rank1":
        rep = vf.verify_rank1_layer(seed=args.seed)
    elif check == "thm1":
        g = load_graph(args)
        if g is None:
            rep = vf.verify_universality(seed=args.seed, kind=kind or "normalized")
        else:
            k = kind or "normalized"
            s = eigendecompose(laplacian(g, k), kind=k)
            rng = np.random.default_rng(args.seed)
            e = rng.standard_normal((g.n, g.n))
            Y = rng.standard_normal((g.n, g.n))
            q = ex.universal_interpolate(s, e, Y)  # PreconditionError -> exit 2
            err = float(np.max(np.abs(apply_full_spectrum_eigen(s, tabulate(q, s), e) - Y)))
            rep = {"check": "thm1", "ok": err < 1e-7, "violations": [] if err < 1e-7 else [{"max_err": err}],
                   "max_err": err, "polynomial": q.to_json()}
    elif check == "thm2":
        graphs = _graphs_for(args, 20, 8)
        rounds_extra = 0 if args.rounds is None else int(args.rounds)
        rep = vf.verify_order2_bound(graphs, _Ks(args, (1, 2, 3)), args.trials, args.seed,
                                     kind=kind or "normalized", extra_rounds=rounds_extra)
    elif check == "thm3":
        g = load_graph(args)
        if g is None:
            rep = vf.verify_lower_bound(graphs=args.graphs or 10, n=args.n or 8, seed=args.seed,
                                        kind=kind or "normalized")
        else:
            q, W, rep = ex.construct_separating_poly(g, seed=args.seed, kind=kind or "normalized")
            rep = dict(rep, check="thm3", ok=not rep["violations"], W=W.tolist(), polynomial=q.to_json())
    elif check == "wlspec":
        graphs = None if load_graph(args) is None else [load_graph(args)]
        if graphs is None and (args.graphs or args.n):
            graphs = _graphs_for(args, 20, 10, labels=2)
        rep = vf.verify_wl1_bound(graphs, _Ks(args, (0, 1, 2, 3)), args.trials, args.seed,
                                  kind=kind or "normalized")
    elif check == "wlsep":
        rep = vf.verify_refinement_separation()
    elif check == "jensen":
        rep = vf.verify_jensen(seed=args.seed)
    elif check == "opconv":
        rep = vf.verify_opconv(seed=args.seed)
    elif check == "hdasym":
        dims = parse_ints(args.dims) if args.dims else None
        rep, rows = vf.verify_hdasym(dims=dims, seeds=args.seeds or 50, seed=args.seed)
        extra["hdasym_sweep.csv"] = csv_text(["d", "seed", "class", "beta_err", "gamma_max"], rows,
                                             args.deterministic)
    elif check == "limitedex":
        rep = vf.verify_limitedex(seed=args.seed, kind=kind or "combinatorial")
    elif check == "energy":
        rep, rows = vf.verify_energy_trend(seed=args.seed)
        extra["energy_sweep.csv"] = csv_text(["h", "seed", "realized_h", "delta", "ratio"], rows,
                                             args.deterministic)
    else:  # argparse restricts choices
        raise ParseError(f"unknown check {check!r}")
    return rep, extra


def cmd_verify(args) -> int:
    try:
        rep, extra = run_check(args)
    except PreconditionError as exc:
        emit_report(args, f"report_{args.check}.json",
                    {"check": args.check, "ok": False, "precondition": str(exc), "violations": []})
        return EXIT_PRECONDITION
    if args.out:
        for name, text in extra.items():
            emit(args, name, text)
    emit_report(args, f"report_{args.check}.json", rep)
    return EXIT_OK if rep["ok"] else EXIT_VIOLATION


def cmd_heterophily_sweep(args) -> int:
    deltas = parse_floats(args.deltas)
    if not deltas:
        raise DomainError("empty delta grid")
    h_grid = parse_floats(args.h_grid)
    if not h_grid:
        raise DomainError("empty h grid")
    sizes = parse_ints(args.sizes.replace("x", ",")) if args.sizes else list(vf.ENERGY_DEFAULTS["sizes"])
    avg_degree = args.avg_degree
    if args.generate:
        name, _, rest = args.generate.partition(":")
        if name != "sbm":
            raise ParseError("heterophily-sweep generates class graphs; use --generate sbm:...")
        params = dict(item.split("=", 1) for item in filter(None, rest.split(",")))
        sizes = parse_sizes(params) if ("sizes" in params or "classes" in params) else sizes
        avg_degree = float(params.get("deg", avg_degree))
    kind = laplacian_kind(args.laplacian or "normalized")
    rows = heterophily_sweep(h_grid, sizes, avg_degree, int(args.dim), float(args.tau),
                             int(args.seeds or 10), deltas, kind, base_seed=args.seed)
    emit(args, "energy.csv", csv_text(["h", "seed", "realized_h", "delta", "ratio"], rows,
                                      args.deterministic))
    summary = {str(d): {format_float(h): m for h, m in median_energy(rows, d).items()} for d in deltas}
    sys.stderr.write(to_json_text({"median_energy": summary}))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--graph", help="edge-list file, or .json graph export")
    src.add_argument("--generate", help="generator spec, e.g. path:n=5 or sbm:sizes=50x50,h=0.5,deg=8")
    common.add_argument("--laplacian", choices=["comb", "norm", "combinatorial", "normalized"])
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="directory for CSV/JSON artifacts")
    common.add_argument("--deterministic", action="store_true", default=None,
                        help="no timestamps, single-threaded BLAS")
    common.add_argument("--config", help="JSON file of defaults; explicit flags win")

    parser = _Parser(prog="fullspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("spectrum", parents=[common], help="Laplacian eigenvalues as CSV")

    ver = sub.add_parser("verify", parents=[common], help="run one randomized check")
    ver.add_argument("check", choices=CHECKS)
    ver.add_argument("--K", help="degree or comma-separated degrees")
    ver.add_argument("--trials", type=int)
    ver.add_argument("--graphs", type=int, help="number of random graphs")
    ver.add_argument("--n", type=int, help="vertices per random graph")
    ver.add_argument("--rounds", type=int, help="extra refinement rounds beyond K (thm2)")
    ver.add_argument("--dims", help="comma-separated feature dimensions (hdasym)")
    ver.add_argument("--seeds", type=int)

    het = sub.add_parser("heterophily-sweep", parents=[common],
                         help="near-diagonal energy of the optimum against heterophily")
    het.add_argument("--h-grid", dest="h_grid")
    het.add_argument("--deltas")
    het.add_argument("--sizes", help="class sizes, e.g. 20x20x20")
    het.add_argument("--avg-degree", dest="avg_degree", type=float)
    het.add_argument("--dim", type=int)
    het.add_argument("--tau", type=float)
    het.add_argument("--seeds", type=int)
    return parser


def resolve_config(args) -> None:
    """Fill unset options from ``--config`` and then from :data:`DEFAULTS`."""
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ParseError(f"{args.config}: top level must be an object")
    for key, value in config.items():
        key = key.replace("-", "_")
        if key in ("graph", "generate"):
            if not (args.graph or args.generate):
                setattr(args, key, value)
        elif hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolve_config(args)
        if args.command == "spectrum":
            return cmd_spectrum(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_heterophily_sweep(args)
    except PreconditionError as exc:
        sys.stderr.write(f"precondition failed: {exc}\n")
        return EXIT_PRECONDITION
    except (FullSpecError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
