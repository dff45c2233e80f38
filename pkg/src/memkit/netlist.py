"""Netlist parsing, the circuit model and the reduced incidence matrix.

Netlist grammar, one device per line, ``#`` starts a comment:

    R|G|C|L  name n+ n-  ([r|g|c|l] value | expr <expression>)
    V|I      name n+ n-  (dc v0 | sine amp freq [phase] [offset])
    MQ|MW|MC|ML|HM|HW  name n+ n-  (builtin[(args)] | expr <expression>)
    .ref node                  # optional reference node (default: node 0)
    .ic  q(name)|phi(name) value   # initial condition of a dynamic variable

The device class is taken from the name prefix.  Expression devices use
the variables legal for their class (MQ: q,i -> v; MW: phi,v -> i;
MC: phi,v -> q; ML: q,i -> phi; HM: q,phi,i -> v; HW: q,phi,v -> i;
R: i -> v; G: v -> i; C: v -> q; L: i -> phi).  Builtins: ``chua_m``,
``chua_w``, ``josephson_mc(i1,k1,g,c)``, ``hybrid_series``,
``hybrid_parallel``.

The first listed node of a branch is its "+" terminal: the branch leaves
it, which fixes the sign convention of the incidence matrix.  Rows of the
reduced incidence matrix are the non-reference nodes in order of first
appearance; columns follow branch declaration order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import devices as dev
from .devices import DeviceClass, DeviceSpec, SourceWaveform
from .errors import ExprError, NetlistError
from .expr import parse_expr

__all__ = [
    "Branch", "Circuit", "IncidenceMatrix",
    "parse_netlist", "format_netlist", "build_circuit", "reduced_incidence",
]


@dataclass(frozen=True)
class Branch:
    spec: DeviceSpec
    pos: str
    neg: str

    @property
    def name(self):
        return self.spec.name


@dataclass(frozen=True)
class Circuit:
    """A connected circuit: branches, node set and reference node.

    Immutable after construction; build instances through
    :func:`parse_netlist` or :func:`build_circuit`, which enforce the
    invariants (connectivity, no self-loops, unique names, reference node
    present).
    """

    branches: tuple
    nodes: tuple
    reference: str
    ics: dict = field(default_factory=dict)

    @property
    def non_reference_nodes(self):
        return tuple(n for n in self.nodes if n != self.reference)

    def branch(self, name):
        for b in self.branches:
            if b.name == name:
                return b
        raise KeyError(name)

    def devices_of(self, dclass):
        return tuple(b for b in self.branches if b.spec.dclass is dclass)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def build_circuit(branch_list, reference=None, ics=None):
    """Assemble and validate a circuit from (spec, pos, neg) triples."""
    branches = tuple(b if isinstance(b, Branch) else Branch(*b)
                     for b in branch_list)
    if not branches:
        raise NetlistError("a circuit needs at least one branch")
    names = set()
    nodes = []
    for b in branches:
        if b.pos == b.neg:
            raise NetlistError(f"self-loop branch '{b.name}' "
                               f"(both terminals at node {b.pos})")
        if b.name in names:
            raise NetlistError(f"duplicate device name '{b.name}'")
        names.add(b.name)
        for n in (b.pos, b.neg):
            if n not in nodes:
                nodes.append(n)
    if reference is None:
        reference = "0"
    if reference not in nodes:
        raise NetlistError(f"reference node '{reference}' does not appear "
                           "in any branch (use a `.ref` directive)")
    uf = _UnionFind(nodes)
    for b in branches:
        uf.union(b.pos, b.neg)
    root = uf.find(reference)
    for n in nodes:
        if uf.find(n) != root:
            raise NetlistError(f"circuit graph is not connected: node '{n}' "
                               f"is unreachable from '{reference}'")
    circuit = Circuit(branches=branches, nodes=tuple(nodes),
                      reference=reference, ics=dict(ics or {}))
    _validate_ics(circuit)
    return circuit


_IC_RE = re.compile(r"^(q|phi)\((.+)\)$")


def _validate_ics(circuit):
    for label in circuit.ics:
        m = _IC_RE.match(label)
        if not m:
            raise NetlistError(f".ic target '{label}' is not of the form "
                               "q(name) or phi(name)")
        kind, name = m.groups()
        try:
            branch = circuit.branch(name)
        except KeyError:
            raise NetlistError(f".ic names unknown device '{name}'") from None
        if kind not in branch.spec.dclass.dynamic_vars:
            raise NetlistError(
                f".ic target '{label}': a {branch.spec.dclass.describe} has "
                f"no dynamic variable '{kind}'")


_TWO_LETTER = ("MQ", "MW", "MC", "ML", "HM", "HW")
_ONE_LETTER = ("R", "G", "C", "L", "V", "I")


def _class_of(name, line):
    upper = name.upper()
    for prefix in _TWO_LETTER:
        if upper.startswith(prefix):
            return DeviceClass(prefix)
    for prefix in _ONE_LETTER:
        if upper.startswith(prefix):
            return DeviceClass(prefix)
    raise NetlistError(f"unknown device class for '{name}'", line)


def _float(token, line, what):
    try:
        return float(token)
    except ValueError:
        raise NetlistError(f"invalid {what} '{token}'", line) from None


def _parse_expression(dclass, body, line):
    text = " ".join(body)
    if not text:
        raise NetlistError("empty expression", line)
    try:
        expr = parse_expr(text)
    except ExprError as err:
        raise NetlistError(f"in expression '{text}': {err}", line) from None
    bad = expr.variables() - set(dclass.reads)
    if bad:
        raise NetlistError(
            f"variable(s) {sorted(bad)} not allowed in a "
            f"{dclass.describe} characteristic (legal: "
            f"{', '.join(dclass.reads)})", line)
    return dev.expression_characteristic(dclass, expr)


_BUILTIN_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)(?:\((.*)\))?$")

# builtin name -> (device class, argument count, factory(args, name))
_BUILTINS = {
    "chua_m": (DeviceClass.Q_MEMRISTOR, 0,
               lambda args, name: dev.chua_q_memristor(name=name)),
    "chua_w": (DeviceClass.PHI_MEMRISTOR, 0,
               lambda args, name: dev.chua_phi_memristor(name=name)),
    "josephson_mc": (DeviceClass.MEMCAPACITOR, 4,
                     lambda args, name: dev.josephson_memcapacitor(
                         *args, name=name)),
    "hybrid_series": (DeviceClass.HYBRID_M, 0,
                      lambda args, name: dev.chua_series_hybrid(name=name)),
    "hybrid_parallel": (DeviceClass.HYBRID_W, 0,
                        lambda args, name: dev.chua_parallel_hybrid(
                            name=name)),
}


def _parse_mem_device(name, dclass, body, line):
    if body[0] == "expr":
        char = _parse_expression(dclass, body[1:], line)
        return DeviceSpec(name=name, dclass=dclass, characteristic=char)
    if len(body) != 1:
        raise NetlistError(f"unexpected trailing tokens after '{body[0]}'",
                           line)
    m = _BUILTIN_RE.match(body[0])
    if not m:
        raise NetlistError(f"malformed builtin reference '{body[0]}'", line)
    bname, argtext = m.groups()
    if bname not in _BUILTINS:
        raise NetlistError(f"unknown builtin '{bname}'", line)
    expected_class, argcount, factory = _BUILTINS[bname]
    if expected_class is not dclass:
        raise NetlistError(
            f"builtin '{bname}' builds a {expected_class.describe} "
            f"({expected_class.letter}), not a {dclass.describe}", line)
    args = []
    if argtext:
        args = [_float(a.strip(), line, f"argument of '{bname}'")
                for a in argtext.split(",")]
    if len(args) != argcount:
        raise NetlistError(f"builtin '{bname}' takes {argcount} "
                           f"argument(s), got {len(args)}", line)
    try:
        spec = factory(args, name)
    except ValueError as err:
        raise NetlistError(str(err), line) from None
    return spec


def _parse_source(name, dclass, body, line):
    kind = body[0]
    if kind == "dc":
        if len(body) != 2:
            raise NetlistError("dc source takes exactly one value", line)
        wave = SourceWaveform.dc(_float(body[1], line, "dc value"))
    elif kind == "sine":
        if not 3 <= len(body) <= 5:
            raise NetlistError(
                "sine source takes amplitude, frequency and optional "
                "phase/offset", line)
        vals = [_float(tok, line, "sine parameter") for tok in body[1:]]
        wave = SourceWaveform.sine(*vals)
    else:
        raise NetlistError(f"unknown source waveform '{kind}' "
                           "(expected dc or sine)", line)
    return DeviceSpec(name=name, dclass=dclass, waveform=wave)


def _parse_classical(name, dclass, body, line):
    if body[0] == "expr":
        char = _parse_expression(dclass, body[1:], line)
        return DeviceSpec(name=name, dclass=dclass, characteristic=char)
    rest = body
    if rest[0].upper() == dclass.letter:
        rest = rest[1:]
        if not rest:
            raise NetlistError(f"missing value after '{body[0]}'", line)
    if len(rest) != 1:
        raise NetlistError(f"unexpected trailing tokens after '{rest[0]}'",
                           line)
    value = _float(rest[0], line, "element value")
    char = dev.linear_characteristic(dclass, value)
    return DeviceSpec(name=name, dclass=dclass, characteristic=char,
                      origin=("value", value))


def _parse_device(tokens, line):
    if len(tokens) < 4:
        raise NetlistError("device line needs name, two terminals and a "
                           "body", line)
    name, pos, neg = tokens[0], tokens[1], tokens[2]
    body = tokens[3:]
    dclass = _class_of(name, line)
    if dclass.is_source:
        spec = _parse_source(name, dclass, body, line)
    elif dclass in (DeviceClass.RESISTOR, DeviceClass.CONDUCTOR,
                    DeviceClass.CAPACITOR, DeviceClass.INDUCTOR):
        spec = _parse_classical(name, dclass, body, line)
    else:
        spec = _parse_mem_device(name, dclass, body, line)
    if pos == neg:
        raise NetlistError(f"self-loop branch '{name}' (both terminals at "
                           f"node {pos})", line)
    return Branch(spec=spec, pos=pos, neg=neg)


def parse_netlist(text):
    """Parse netlist text into a validated :class:`Circuit`."""
    branches = []
    reference = None
    ics = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0].startswith("."):
            directive = tokens[0]
            if directive == ".ref":
                if len(tokens) != 2:
                    raise NetlistError(".ref takes exactly one node", line_no)
                reference = tokens[1]
            elif directive == ".ic":
                if len(tokens) != 3:
                    raise NetlistError(".ic takes a variable and a value",
                                       line_no)
                if tokens[1] in ics:
                    raise NetlistError(f"duplicate .ic for '{tokens[1]}'",
                                       line_no)
                ics[tokens[1]] = _float(tokens[2], line_no, ".ic value")
            else:
                raise NetlistError(f"unknown directive '{directive}'",
                                   line_no)
            continue
        branches.append(_parse_device(tokens, line_no))
    return build_circuit(branches, reference=reference, ics=ics)


def _fmt_float(x):
    return repr(float(x))


def _format_body(spec):
    if spec.dclass.is_source:
        w = spec.waveform
        if w.kind == "dc":
            return f"dc {_fmt_float(w.level)}"
        return (f"sine {_fmt_float(w.amplitude)} {_fmt_float(w.frequency)} "
                f"{_fmt_float(w.phase)} {_fmt_float(w.offset)}")
    char = spec.characteristic
    if char.affine_coeff is not None:
        return f"{spec.dclass.letter.lower()} {_fmt_float(char.affine_coeff)}"
    if spec.origin and spec.origin[0] == "builtin":
        _, bname, args = spec.origin
        if args:
            return f"{bname}({','.join(_fmt_float(a) for a in args)})"
        return bname
    return f"expr {char.expr}"


def format_netlist(circuit):
    """Canonical netlist text; a fixed point of parse -> format."""
    lines = [f".ref {circuit.reference}"]
    for b in circuit.branches:
        lines.append(f"{b.name} {b.pos} {b.neg} {_format_body(b.spec)}")
    for label, value in circuit.ics.items():
        lines.append(f".ic {label} {_fmt_float(value)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class IncidenceMatrix:
    """Reduced incidence matrix with its class-wise column partition.

    ``matrix[i, j]`` is +1 if branch j leaves node i, -1 if it enters it, 0
    otherwise; the reference node's row is omitted.  ``column_partition``
    maps every device class to the tuple of column indices of its
    branches (possibly empty).
    """

    matrix: np.ndarray
    row_nodes: tuple
    column_partition: dict

    def block(self, *classes):
        """Columns of the given classes, concatenated in argument order."""
        cols = [j for c in classes for j in self.column_partition[c]]
        return self.matrix[:, cols].astype(float)


def reduced_incidence(circuit):
    rows = circuit.non_reference_nodes
    row_index = {n: k for k, n in enumerate(rows)}
    b = len(circuit.branches)
    a = np.zeros((len(rows), b), dtype=int)
    partition = {c: [] for c in DeviceClass}
    for j, branch in enumerate(circuit.branches):
        if branch.pos in row_index:
            a[row_index[branch.pos], j] = 1
        if branch.neg in row_index:
            a[row_index[branch.neg], j] = -1
        partition[branch.spec.dclass].append(j)
    return IncidenceMatrix(
        matrix=a, row_nodes=rows,
        column_partition={c: tuple(ix) for c, ix in partition.items()})
