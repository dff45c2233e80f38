"""Command-line front-end: classify, topology, index and sim subcommands.

Exit codes: 0 on success, 1 when an analysis is refused (ill-posed input,
index-two simulation, Newton failure), 2 on input errors (unreadable
files, netlist or expression syntax, out-of-scope devices).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .devices import classify
from .errors import (IllPosedError, InitializationError, MemkitError,
                     NetlistError, NewtonError, SimulationError,
                     SingularPencilError)
from .index import analyze
from .netlist import parse_netlist
from .nodal import assemble
from .sim import SolverConfig, simulate
from .topology import degeneracy_report

EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_INPUT = 2

_REFUSAL_ERRORS = (IllPosedError, InitializationError, NewtonError,
                   SimulationError, SingularPencilError)


class _InputError(Exception):
    pass


def _load_circuit(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise _InputError(f"{path}: {err.strerror or err}") from None
    try:
        return parse_netlist(text)
    except NetlistError as err:
        raise _InputError(f"{path}: {err}") from None


def _load_point(path, layout):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise _InputError(f"{path}: {err.strerror or err}") from None
    z = np.zeros(layout.n_total)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise _InputError(f"{path}:{line_no}: expected 'label value'")
        label, value = parts
        try:
            z[layout.index_of(label)] = float(value)
        except KeyError:
            raise _InputError(
                f"{path}:{line_no}: unknown variable '{label}'") from None
        except ValueError:
            raise _InputError(
                f"{path}:{line_no}: invalid value '{value}'") from None
    return z


def _table(rows, header):
    widths = [max(len(str(r[k])) for r in rows + [header])
              for k in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def _run_classify(path, args):
    circuit = _load_circuit(path)
    rows = []
    for branch in circuit.branches:
        spec = branch.spec
        info = classify(spec.dclass)
        rows.append((spec.name, spec.dclass.describe,
                     info.differential_order, info.state_order,
                     info.controlling))
    if args.format == "machine":
        lines = []
        for name, describe, diff, state, ctrl in rows:
            lines.append(f"device.{name}.class={describe}")
            lines.append(f"device.{name}.differential_order={diff}")
            lines.append(f"device.{name}.state_order={state}")
            lines.append(f"device.{name}.controlling={ctrl}")
        return "\n".join(lines) + "\n"
    header = ("device", "class", "diff. order", "state order", "controlling")
    return _table(rows, header) + "\n"


def _run_topology(path, args):
    circuit = _load_circuit(path)
    report = degeneracy_report(circuit)
    if args.format == "machine":
        return "\n".join(f"{k}={v}" for k, v in report.machine_items()) + "\n"
    return "\n".join(report.lines()) + "\n"


def _run_index(path, args):
    circuit = _load_circuit(path)
    point = None
    if args.point:
        layout = assemble(circuit).layout
        point = _load_point(args.point, layout)
    report = analyze(circuit, point=point, rank_tol=args.rank_tol,
                     with_oracle=args.oracle)
    if args.format == "machine":
        return report.to_machine()
    return report.to_text()


def _run_sim(path, args):
    circuit = _load_circuit(path)
    dae = assemble(circuit)
    config = SolverConfig(h=args.dt, newton_tol=args.newton_tol,
                          rank_tol=args.rank_tol)
    trace = simulate(dae, t_stop=args.tstop, config=config)
    out = args.out or (Path(path).stem + ".csv")
    trace.to_csv(out)
    if args.format == "machine":
        return (f"out={out}\nrows={len(trace.times)}\n"
                f"tstop={args.tstop:.17g}\ndt={args.dt:.17g}\n")
    return (f"wrote {out}: {len(trace.times)} rows, "
            f"{len(trace.labels)} variables\n")


_RUNNERS = {
    "classify": _run_classify,
    "topology": _run_topology,
    "index": _run_index,
    "sim": _run_sim,
}


def _run_one(path, args):
    """Returns (exit code, stdout text, stderr text) for one netlist."""
    try:
        return EXIT_OK, _RUNNERS[args.command](path, args), ""
    except _InputError as err:
        return EXIT_INPUT, "", f"error: {err}\n"
    except _REFUSAL_ERRORS as err:
        return EXIT_REFUSED, "", f"refused: {path}: {err}\n"
    except MemkitError as err:
        return EXIT_REFUSED, "", f"error: {path}: {err}\n"


def _add_common(parser):
    parser.add_argument("netlists", nargs="+", metavar="netlist",
                        help="netlist file(s)")
    parser.add_argument("--format", choices=("human", "machine"),
                        default="human", help="report format")
    parser.add_argument("--jobs", type=int, default=1, metavar="N",
                        help="parallel workers for multi-netlist batches")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="memkit",
        description="Analyze and simulate first-order memristive circuits "
                    "from netlists.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify",
                       help="per-device class / order / controlling table")
    _add_common(p)

    p = sub.add_parser("topology",
                       help="well-posedness and degeneracy report")
    _add_common(p)

    p = sub.add_parser("index", help="DAE index analysis")
    _add_common(p)
    p.add_argument("--point", metavar="FILE",
                   help="evaluation point file: 'label value' lines")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check with the Kronecker index oracle")
    p.add_argument("--rank-tol", type=float, default=1e-10,
                   dest="rank_tol", metavar="X",
                   help="relative rank threshold (default 1e-10)")

    p = sub.add_parser("sim", help="backward-Euler transient simulation")
    _add_common(p)
    p.add_argument("--tstop", type=float, default=1.0, metavar="T",
                   help="stop time (default 1.0)")
    p.add_argument("--dt", type=float, default=1e-3, metavar="H",
                   help="fixed step size (default 1e-3)")
    p.add_argument("--newton-tol", type=float, default=1e-10,
                   dest="newton_tol", metavar="X",
                   help="Newton residual tolerance (default 1e-10)")
    p.add_argument("--rank-tol", type=float, default=1e-10,
                   dest="rank_tol", metavar="X")
    p.add_argument("--out", metavar="FILE",
                   help="CSV output path (default: <netlist>.csv)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "sim" and args.out and len(args.netlists) > 1:
        print("error: --out requires a single netlist", file=sys.stderr)
        return EXIT_INPUT
    paths = args.netlists
    if args.jobs > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda p: _run_one(p, args), paths))
    else:
        results = [_run_one(p, args) for p in paths]
    code = EXIT_OK
    for path, (status, out, err) in zip(paths, results):
        if len(paths) > 1 and out:
            sys.stdout.write(f"== {path}\n")
        sys.stdout.write(out)
        sys.stderr.write(err)
        code = max(code, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
