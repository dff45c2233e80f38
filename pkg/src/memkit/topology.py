"""Graph checks: well-posedness and topological degeneracy.

A circuit is topologically degenerate when it contains a loop made only of
voltage sources, capacitors and/or memcapacitors (a VCM-loop), or a cutset
made only of current sources, inductors and/or meminductors (an
ILM-cutset).  Such configurations push the nodal model from index one to
index two.  Pure voltage-source loops and pure current-source cutsets make
the circuit ill-posed outright.

Loops are found with union-find over the restricted subgraph; cutsets by
deleting the restricted branches and looking at the connected components.
Witness selection is deterministic: the first cycle closed in branch
declaration order, or the boundary branches of the component containing
the earliest-declared node.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .devices import DeviceClass

__all__ = [
    "DegeneracyReport", "WellPosedness",
    "check_wellposed", "vcm_loop_exists", "ilm_cutset_exists",
    "degeneracy_report", "format_witness",
]

VCM_CLASSES = (DeviceClass.VSOURCE, DeviceClass.CAPACITOR,
               DeviceClass.MEMCAPACITOR)
ILM_CLASSES = (DeviceClass.ISOURCE, DeviceClass.INDUCTOR,
               DeviceClass.MEMINDUCTOR)


def format_witness(names):
    return "{" + ", ".join(names) + "}"


def _loop_witness(circuit, classes):
    """First cycle (branch names) in the subgraph of the given classes."""
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    adjacency = {}
    for branch in circuit.branches:
        if branch.spec.dclass not in classes:
            continue
        ra, rb = find(branch.pos), find(branch.neg)
        if ra == rb:
            # closing branch found; recover the tree path between its ends
            path = _tree_path(adjacency, branch.pos, branch.neg)
            witness = set(path) | {branch.name}
            order = {b.name: k for k, b in enumerate(circuit.branches)}
            return sorted(witness, key=order.__getitem__)
        parent[rb] = ra
        adjacency.setdefault(branch.pos, []).append((branch.neg, branch.name))
        adjacency.setdefault(branch.neg, []).append((branch.pos, branch.name))
    return None


def _tree_path(adjacency, start, goal):
    """Branch names along the unique path start -> goal in a forest."""
    queue = deque([start])
    came = {start: (None, None)}
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, name in adjacency.get(node, ()):
            if other not in came:
                came[other] = (node, name)
                queue.append(other)
    path = []
    node = goal
    while came[node][0] is not None:
        node, name = came[node]
        path.append(name)
    return path


def _cutset_witness(circuit, classes):
    """Boundary branches isolating one component of the graph minus the
    given classes; None when deleting them keeps the graph connected."""
    parent = {n: n for n in circuit.nodes}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    removed = []
    for branch in circuit.branches:
        if branch.spec.dclass in classes:
            removed.append(branch)
        else:
            parent[find(branch.neg)] = find(branch.pos)
    components = {find(n) for n in circuit.nodes}
    if len(components) == 1:
        return None
    island = find(circuit.nodes[0])
    witness = [b.name for b in removed
               if (find(b.pos) == island) != (find(b.neg) == island)]
    return witness


@dataclass(frozen=True)
class WellPosedness:
    ok: bool
    v_loop: tuple | None = None
    i_cutset: tuple | None = None


def check_wellposed(circuit):
    """Detect loops of voltage sources and cutsets of current sources."""
    v_loop = _loop_witness(circuit, (DeviceClass.VSOURCE,))
    i_cutset = _cutset_witness(circuit, (DeviceClass.ISOURCE,))
    return WellPosedness(ok=v_loop is None and i_cutset is None,
                         v_loop=tuple(v_loop) if v_loop else None,
                         i_cutset=tuple(i_cutset) if i_cutset else None)


def vcm_loop_exists(circuit):
    """Witness of a loop of {V, C, MC} branches, or None."""
    witness = _loop_witness(circuit, VCM_CLASSES)
    return tuple(witness) if witness else None


def ilm_cutset_exists(circuit):
    """Witness of a cutset of {I, L, ML} branches, or None."""
    witness = _cutset_witness(circuit, ILM_CLASSES)
    return tuple(witness) if witness else None


@dataclass(frozen=True)
class DegeneracyReport:
    well_posed: bool
    v_loop: tuple | None
    i_cutset: tuple | None
    vcm_loop: tuple | None
    ilm_cutset: tuple | None
    nondegenerate: bool

    def lines(self):
        out = []
        if self.well_posed:
            out.append("well-posed: yes")
        else:
            kind = ("loop of voltage sources " + format_witness(self.v_loop)
                    if self.v_loop else
                    "cutset of current sources "
                    + format_witness(self.i_cutset))
            out.append(f"well-posed: no ({kind})")
        out.append("VCM-loop: " + (format_witness(self.vcm_loop)
                                   if self.vcm_loop else "none"))
        out.append("ILM-cutset: " + (format_witness(self.ilm_cutset)
                                     if self.ilm_cutset else "none"))
        out.append("topology: " + self.summary())
        return out

    def summary(self):
        if self.nondegenerate:
            return "nondegenerate"
        parts = []
        if self.vcm_loop:
            parts.append("VCM-loop " + format_witness(self.vcm_loop))
        if self.ilm_cutset:
            parts.append("ILM-cutset " + format_witness(self.ilm_cutset))
        return "degenerate: " + "; ".join(parts)

    def machine_items(self):
        yield "well_posed", "yes" if self.well_posed else "no"
        yield "vcm_loop", ",".join(self.vcm_loop) if self.vcm_loop else ""
        yield ("ilm_cutset",
               ",".join(self.ilm_cutset) if self.ilm_cutset else "")
        yield "nondegenerate", "yes" if self.nondegenerate else "no"


def degeneracy_report(circuit):
    """Aggregate well-posedness, VCM-loop and ILM-cutset detection."""
    wp = check_wellposed(circuit)
    vcm = vcm_loop_exists(circuit)
    ilm = ilm_cutset_exists(circuit)
    return DegeneracyReport(
        well_posed=wp.ok, v_loop=wp.v_loop, i_cutset=wp.i_cutset,
        vcm_loop=vcm, ilm_cutset=ilm,
        nondegenerate=vcm is None and ilm is None)
