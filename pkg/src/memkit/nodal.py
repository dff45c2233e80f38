"""Assembly of the semiexplicit nodal model and its exact block Jacobian.

The model couples node potentials e with branch variables through
Kirchhoff's laws A i = 0, v = A^T e, where A is the reduced incidence
matrix.  Dynamic variables (charges and fluxes) come first, ordered by
block:

    q_c, q_mc, phi_l, phi_ml, q_m, q_ml, q_hm, q_hw,
    phi_w, phi_mc, phi_hm, phi_hw

followed by the algebraic variables

    e, i_c, i_mc, i_u, i_l, i_ml, i_r, i_m, i_hm, i_hw.

Within a block, devices appear in branch declaration order.  The residual
stacks the twelve dynamic relations (charge rates equal branch currents,
flux rates equal branch voltages) and then the algebraic rows: the KCL row
block, the capacitor, memcapacitor and voltage-source constraints, the
inductor and meminductor constraints, and the current-controlled resistor,
q-memristor, hybrid-M and hybrid-W constraints.  Branch currents of
voltage-controlled resistors and phi-memristors are eliminated inside the
KCL rows through their characteristics, so they carry no current variable.

For the dynamic rows the residual returns the right-hand side f (the
integrator forms x' - f).  Writing the system as E z' = f(z, t) with
E = blockdiag{I, 0}, the Jacobian of f splits as

    F = [[0,   F12],
         [F21, F22]]

with F12 constant (identity and A^T sub-blocks only).  All characteristic
partials are exact (forward-mode differentiation), which the test suite
cross-checks against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import DeviceClass
from .errors import AssemblyError
from .netlist import reduced_incidence

__all__ = [
    "DYNAMIC_BLOCKS", "ALGEBRAIC_BLOCKS", "VariableLayout",
    "JacobianBlocks", "SemiExplicitDAE", "assemble", "format_matrix_dump",
]

C = DeviceClass

# (block name, device class, variable kind); order defines the layout.
DYNAMIC_BLOCKS = (
    ("q_c", C.CAPACITOR, "q"),
    ("q_mc", C.MEMCAPACITOR, "q"),
    ("phi_l", C.INDUCTOR, "phi"),
    ("phi_ml", C.MEMINDUCTOR, "phi"),
    ("q_m", C.Q_MEMRISTOR, "q"),
    ("q_ml", C.MEMINDUCTOR, "q"),
    ("q_hm", C.HYBRID_M, "q"),
    ("q_hw", C.HYBRID_W, "q"),
    ("phi_w", C.PHI_MEMRISTOR, "phi"),
    ("phi_mc", C.MEMCAPACITOR, "phi"),
    ("phi_hm", C.HYBRID_M, "phi"),
    ("phi_hw", C.HYBRID_W, "phi"),
)

ALGEBRAIC_BLOCKS = (
    ("e", None, "e"),
    ("i_c", C.CAPACITOR, "i"),
    ("i_mc", C.MEMCAPACITOR, "i"),
    ("i_u", C.VSOURCE, "i"),
    ("i_l", C.INDUCTOR, "i"),
    ("i_ml", C.MEMINDUCTOR, "i"),
    ("i_r", C.RESISTOR, "i"),
    ("i_m", C.Q_MEMRISTOR, "i"),
    ("i_hm", C.HYBRID_M, "i"),
    ("i_hw", C.HYBRID_W, "i"),
)

# Classes whose characteristic is evaluated during assembly.
_CHAR_CLASSES = (C.CONDUCTOR, C.PHI_MEMRISTOR, C.CAPACITOR, C.MEMCAPACITOR,
                 C.RESISTOR, C.INDUCTOR, C.MEMINDUCTOR, C.Q_MEMRISTOR,
                 C.HYBRID_M, C.HYBRID_W)


@dataclass(frozen=True)
class VariableLayout:
    """Index bookkeeping for the stacked variable vector z = (x, y)."""

    dynamic_labels: tuple
    algebraic_labels: tuple
    dynamic_slices: dict     # block name -> slice into x (= global z[:r])
    algebraic_slices: dict   # block name -> slice into y (local)
    n_dynamic: int
    n_algebraic: int

    @property
    def n_total(self):
        return self.n_dynamic + self.n_algebraic

    @property
    def labels(self):
        return self.dynamic_labels + self.algebraic_labels

    def zslice(self, block):
        """Slice of a block in the full vector z."""
        if block in self.dynamic_slices:
            return self.dynamic_slices[block]
        s = self.algebraic_slices[block]
        return slice(s.start + self.n_dynamic, s.stop + self.n_dynamic)

    def yslice(self, block):
        """Slice of an algebraic block in the algebraic subvector y."""
        return self.algebraic_slices[block]

    def index_of(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown variable label '{label}'") from None


def _build_layout(circuit, groups):
    dynamic_labels = []
    dynamic_slices = {}
    for block, dclass, kind in DYNAMIC_BLOCKS:
        start = len(dynamic_labels)
        dynamic_labels.extend(f"{kind}({b.name})" for _, b in groups[dclass])
        dynamic_slices[block] = slice(start, len(dynamic_labels))
    algebraic_labels = [f"e({n})" for n in circuit.non_reference_nodes]
    algebraic_slices = {"e": slice(0, len(algebraic_labels))}
    for block, dclass, _ in ALGEBRAIC_BLOCKS[1:]:
        start = len(algebraic_labels)
        algebraic_labels.extend(f"i({b.name})" for _, b in groups[dclass])
        algebraic_slices[block] = slice(start, len(algebraic_labels))
    return VariableLayout(
        dynamic_labels=tuple(dynamic_labels),
        algebraic_labels=tuple(algebraic_labels),
        dynamic_slices=dynamic_slices,
        algebraic_slices=algebraic_slices,
        n_dynamic=len(dynamic_labels),
        n_algebraic=len(algebraic_labels),
    )


@dataclass(frozen=True)
class JacobianBlocks:
    """Exact Jacobian blocks of the stacked residual at one point."""

    F12: np.ndarray
    F21: np.ndarray
    F22: np.ndarray

    @property
    def full(self):
        r, p = self.F12.shape
        top = np.hstack([np.zeros((r, r)), self.F12])
        bottom = np.hstack([self.F21, self.F22])
        return np.vstack([top, bottom])


class SemiExplicitDAE:
    """Nodal model of a circuit: variable layout, residual and Jacobian.

    Instances are immutable; residual and Jacobian evaluations are pure
    and may run concurrently for different points.
    """

    def __init__(self, circuit):
        self.circuit = circuit
        self.incidence = reduced_incidence(circuit)
        groups = {c: [] for c in DeviceClass}
        for j, branch in enumerate(circuit.branches):
            groups[branch.spec.dclass].append((j, branch))
        self._groups = groups
        self.layout = _build_layout(circuit, groups)
        a = self.incidence.matrix.astype(float)
        self._a = a
        self._blocks = {c: self.incidence.block(c) for c in DeviceClass}
        # per-class column matrices for branch voltages v = A_cls^T e
        self._cols = {c: self._blocks[c].T for c in DeviceClass}
        self._vsources = [b.spec.waveform for _, b in groups[C.VSOURCE]]
        self._isources = [b.spec.waveform for _, b in groups[C.ISOURCE]]
        lay = self.layout
        # (class -> (q indices, phi indices, current indices) into z)
        self._state_ix = {}
        for cls in _CHAR_CLASSES:
            k = len(groups[cls])
            qix = phiix = curix = None
            for block, dclass, kind in DYNAMIC_BLOCKS:
                if dclass is cls:
                    s = lay.dynamic_slices[block]
                    if kind == "q":
                        qix = np.arange(s.start, s.stop)
                    else:
                        phiix = np.arange(s.start, s.stop)
            for block, dclass, _ in ALGEBRAIC_BLOCKS[1:]:
                if dclass is cls:
                    s = lay.zslice(block)
                    curix = np.arange(s.start, s.stop)
            self._state_ix[cls] = (qix, phiix, curix, k)

    @property
    def E(self):
        """Left-hand matrix of E z' = f: blockdiag{identity, zero}."""
        lay = self.layout
        e = np.zeros((lay.n_total, lay.n_total))
        e[:lay.n_dynamic, :lay.n_dynamic] = np.eye(lay.n_dynamic)
        return e

    def _check_dimension(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.layout.n_total,):
            raise AssemblyError(
                f"state vector has shape {z.shape}, expected "
                f"({self.layout.n_total},)")
        return z

    def _e_of(self, z):
        lay = self.layout
        return z[lay.n_dynamic:lay.n_dynamic + lay.n_algebraic][
            lay.yslice("e")]

    def _class_eval(self, cls, z, e, with_partials):
        """Characteristic values (and partials) of one device class."""
        qix, phiix, curix, k = self._state_ix[cls]
        vals = np.empty(k)
        parts = {n: np.zeros(k) for n in ("q", "phi", "i", "v")} \
            if with_partials else None
        if k == 0:
            return vals, parts
        v = self._cols[cls] @ e
        for j, (_, branch) in enumerate(self._groups[cls]):
            char = branch.spec.characteristic
            env = {
                "q": z[qix[j]] if qix is not None else 0.0,
                "phi": z[phiix[j]] if phiix is not None else 0.0,
                "i": z[curix[j]] if curix is not None else 0.0,
                "v": v[j],
            }
            if with_partials:
                value, grad = char.expr.dual(env, char.reads)
                for name, g in zip(char.reads, grad):
                    parts[name][j] = g
            else:
                value = char.expr.eval(env)
            vals[j] = value
        return vals, parts

    def _evaluate(self, z, t, with_partials):
        z = self._check_dimension(z)
        e = self._e_of(z)
        evals = {cls: self._class_eval(cls, z, e, with_partials)
                 for cls in _CHAR_CLASSES}
        return z, e, evals

    def _residual_from(self, z, t, e, evals):
        lay = self.layout
        res = np.zeros(lay.n_total)
        cur = {}
        for block, dclass, _ in ALGEBRAIC_BLOCKS[1:]:
            cur[dclass] = z[lay.zslice(block)]
        # dynamic rows: charge rates are branch currents, flux rates are
        # branch voltages
        for block, dclass, kind in DYNAMIC_BLOCKS:
            s = lay.dynamic_slices[block]
            if kind == "q":
                res[s] = cur[dclass]
            else:
                res[s] = self._cols[dclass] @ e
        off = lay.n_dynamic
        yrow = lambda block: _shift(lay.yslice(block), off)
        # KCL rows
        kcl = np.zeros(len(e))
        for dclass in (C.CAPACITOR, C.MEMCAPACITOR, C.VSOURCE, C.INDUCTOR,
                       C.MEMINDUCTOR, C.RESISTOR, C.Q_MEMRISTOR, C.HYBRID_M,
                       C.HYBRID_W):
            kcl += self._blocks[dclass] @ cur[dclass]
        kcl += self._blocks[C.CONDUCTOR] @ evals[C.CONDUCTOR][0]
        kcl += self._blocks[C.PHI_MEMRISTOR] @ evals[C.PHI_MEMRISTOR][0]
        if self._isources:
            kcl += self._blocks[C.ISOURCE] @ np.array(
                [w.value(t) for w in self._isources])
        res[yrow("e")] = kcl
        res[yrow("i_c")] = z[lay.zslice("q_c")] - evals[C.CAPACITOR][0]
        res[yrow("i_mc")] = z[lay.zslice("q_mc")] - evals[C.MEMCAPACITOR][0]
        if self._vsources:
            vs = np.array([w.value(t) for w in self._vsources])
            res[yrow("i_u")] = vs - self._cols[C.VSOURCE] @ e
        res[yrow("i_l")] = z[lay.zslice("phi_l")] - evals[C.INDUCTOR][0]
        res[yrow("i_ml")] = z[lay.zslice("phi_ml")] - evals[C.MEMINDUCTOR][0]
        res[yrow("i_r")] = evals[C.RESISTOR][0] - self._cols[C.RESISTOR] @ e
        res[yrow("i_m")] = (evals[C.Q_MEMRISTOR][0]
                            - self._cols[C.Q_MEMRISTOR] @ e)
        res[yrow("i_hm")] = (evals[C.HYBRID_M][0]
                             - self._cols[C.HYBRID_M] @ e)
        res[yrow("i_hw")] = cur[C.HYBRID_W] - evals[C.HYBRID_W][0]
        if not np.all(np.isfinite(res)):
            bad = int(np.flatnonzero(~np.isfinite(res))[0])
            raise AssemblyError(
                f"residual row {bad} ({self._row_label(bad)}) is not finite")
        return res

    def _row_label(self, row):
        lay = self.layout
        if row < lay.n_dynamic:
            return f"rate of {lay.dynamic_labels[row]}"
        local = row - lay.n_dynamic
        for block, _, _ in ALGEBRAIC_BLOCKS:
            s = lay.yslice(block)
            if s.start <= local < s.stop:
                if block == "e":
                    return f"KCL at node {lay.algebraic_labels[local][2:-1]}"
                return f"constraint of {lay.algebraic_labels[local][2:-1]}"
        return "?"

    def residual(self, z, t=0.0):
        """Stacked residual; dynamic rows hold the right-hand side f."""
        z, e, evals = self._evaluate(z, t, with_partials=False)
        return self._residual_from(z, t, e, evals)

    def _jacobian_from(self, z, e, evals):
        lay = self.layout
        r, p = lay.n_dynamic, lay.n_algebraic
        f12 = np.zeros((r, p))
        f21 = np.zeros((p, r))
        f22 = np.zeros((p, p))
        ysl = lay.yslice
        dsl = lay.dynamic_slices
        e_sl = ysl("e")
        for block, dclass, kind in DYNAMIC_BLOCKS:
            s = dsl[block]
            if kind == "q":
                cur_block = {C.CAPACITOR: "i_c", C.MEMCAPACITOR: "i_mc",
                             C.Q_MEMRISTOR: "i_m", C.MEMINDUCTOR: "i_ml",
                             C.HYBRID_M: "i_hm", C.HYBRID_W: "i_hw"}[dclass]
                f12[s, ysl(cur_block)] = np.eye(s.stop - s.start)
            else:
                f12[s, e_sl] = self._cols[dclass]
        # KCL rows: voltage-controlled conductances and memductances fold
        # into the e-columns; the flux partial of the phi-memristor map
        # couples KCL to phi_w
        g_v = evals[C.CONDUCTOR][1]["v"]
        w_v = evals[C.PHI_MEMRISTOR][1]["v"]
        w_phi = evals[C.PHI_MEMRISTOR][1]["phi"]
        ag, aw = self._blocks[C.CONDUCTOR], self._blocks[C.PHI_MEMRISTOR]
        f22[e_sl, e_sl] = (ag * g_v) @ ag.T + (aw * w_v) @ aw.T
        for dclass, block in ((C.CAPACITOR, "i_c"), (C.MEMCAPACITOR, "i_mc"),
                              (C.VSOURCE, "i_u"), (C.INDUCTOR, "i_l"),
                              (C.MEMINDUCTOR, "i_ml"), (C.RESISTOR, "i_r"),
                              (C.Q_MEMRISTOR, "i_m"), (C.HYBRID_M, "i_hm"),
                              (C.HYBRID_W, "i_hw")):
            f22[e_sl, ysl(block)] = self._blocks[dclass]
        f21[e_sl, dsl["phi_w"]] = aw * w_phi
        # capacitor rows: q_c - c(v_c)
        f21[ysl("i_c"), dsl["q_c"]] = np.eye(len(self._groups[C.CAPACITOR]))
        f22[ysl("i_c"), e_sl] = -(self._cols[C.CAPACITOR].T
                                  * evals[C.CAPACITOR][1]["v"]).T
        # memcapacitor rows: q_mc - omega(phi_mc, v_mc)
        n_mc = len(self._groups[C.MEMCAPACITOR])
        f21[ysl("i_mc"), dsl["q_mc"]] = np.eye(n_mc)
        f21[ysl("i_mc"), dsl["phi_mc"]] = -np.diag(
            evals[C.MEMCAPACITOR][1]["phi"])
        f22[ysl("i_mc"), e_sl] = -(self._cols[C.MEMCAPACITOR].T
                                   * evals[C.MEMCAPACITOR][1]["v"]).T
        # voltage source rows: v_s(t) - v_u
        f22[ysl("i_u"), e_sl] = -self._cols[C.VSOURCE]
        # inductor rows: phi_l - l(i_l)
        f21[ysl("i_l"), dsl["phi_l"]] = np.eye(len(self._groups[C.INDUCTOR]))
        f22[ysl("i_l"), ysl("i_l")] = -np.diag(evals[C.INDUCTOR][1]["i"])
        # meminductor rows: phi_ml - theta(q_ml, i_ml)
        n_ml = len(self._groups[C.MEMINDUCTOR])
        f21[ysl("i_ml"), dsl["phi_ml"]] = np.eye(n_ml)
        f21[ysl("i_ml"), dsl["q_ml"]] = -np.diag(
            evals[C.MEMINDUCTOR][1]["q"])
        f22[ysl("i_ml"), ysl("i_ml")] = -np.diag(
            evals[C.MEMINDUCTOR][1]["i"])
        # current-controlled resistor rows: r(i_r) - v_r
        f22[ysl("i_r"), e_sl] = -self._cols[C.RESISTOR]
        f22[ysl("i_r"), ysl("i_r")] = np.diag(evals[C.RESISTOR][1]["i"])
        # q-memristor rows: eta(q_m, i_m) - v_m
        f21[ysl("i_m"), dsl["q_m"]] = np.diag(evals[C.Q_MEMRISTOR][1]["q"])
        f22[ysl("i_m"), e_sl] = -self._cols[C.Q_MEMRISTOR]
        f22[ysl("i_m"), ysl("i_m")] = np.diag(evals[C.Q_MEMRISTOR][1]["i"])
        # hybrid-M rows: psi(q_hm, phi_hm, i_hm) - v_hm
        f21[ysl("i_hm"), dsl["q_hm"]] = np.diag(evals[C.HYBRID_M][1]["q"])
        f21[ysl("i_hm"), dsl["phi_hm"]] = np.diag(
            evals[C.HYBRID_M][1]["phi"])
        f22[ysl("i_hm"), e_sl] = -self._cols[C.HYBRID_M]
        f22[ysl("i_hm"), ysl("i_hm")] = np.diag(evals[C.HYBRID_M][1]["i"])
        # hybrid-W rows: i_hw - xi(q_hw, phi_hw, v_hw)
        n_hw = len(self._groups[C.HYBRID_W])
        f21[ysl("i_hw"), dsl["q_hw"]] = -np.diag(evals[C.HYBRID_W][1]["q"])
        f21[ysl("i_hw"), dsl["phi_hw"]] = -np.diag(
            evals[C.HYBRID_W][1]["phi"])
        f22[ysl("i_hw"), e_sl] = -(self._cols[C.HYBRID_W].T
                                   * evals[C.HYBRID_W][1]["v"]).T
        f22[ysl("i_hw"), ysl("i_hw")] = np.eye(n_hw)
        return JacobianBlocks(F12=f12, F21=f21, F22=f22)

    def jacobian(self, z, t=0.0):
        """Exact Jacobian blocks F12, F21, F22 at (z, t)."""
        z, e, evals = self._evaluate(z, t, with_partials=True)
        return self._jacobian_from(z, e, evals)

    def residual_and_jacobian(self, z, t=0.0):
        """Residual and Jacobian from a single characteristic sweep."""
        z, e, evals = self._evaluate(z, t, with_partials=True)
        return (self._residual_from(z, t, e, evals),
                self._jacobian_from(z, e, evals))

    def incremental_matrices(self, z):
        """Diagonal incremental matrices at z, keyed by a short name.

        Keys: R, G, C, L, M, W, Cm, Lm, Mh, Wh.  Each value is a square
        (possibly empty) diagonal matrix in branch declaration order.
        """
        z, e, evals = self._evaluate(z, 0.0, with_partials=True)
        key = {
            "R": (C.RESISTOR, "i"), "G": (C.CONDUCTOR, "v"),
            "C": (C.CAPACITOR, "v"), "L": (C.INDUCTOR, "i"),
            "M": (C.Q_MEMRISTOR, "i"), "W": (C.PHI_MEMRISTOR, "v"),
            "Cm": (C.MEMCAPACITOR, "v"), "Lm": (C.MEMINDUCTOR, "i"),
            "Mh": (C.HYBRID_M, "i"), "Wh": (C.HYBRID_W, "v"),
        }
        return {name: np.diag(evals[cls][1][var])
                for name, (cls, var) in key.items()}

    def initial_state(self):
        """Dynamic values from the netlist `.ic` directives (default 0)."""
        x0 = np.zeros(self.layout.n_dynamic)
        for label, value in self.circuit.ics.items():
            x0[self.layout.index_of(label)] = value
        return x0

    def state_order_sum(self):
        return sum(b.spec.dclass.state_order for b in self.circuit.branches)


def _shift(s, off):
    return slice(s.start + off, s.stop + off)


def assemble(circuit):
    """Build the semiexplicit nodal DAE of a circuit."""
    return SemiExplicitDAE(circuit)


def _format_block(name, mat, row_labels, col_labels):
    lines = [f"[{name}] {mat.shape[0]}x{mat.shape[1]}"]
    lines.append("        " + " ".join(f"{c:>14}" for c in col_labels))
    for lbl, row in zip(row_labels, mat):
        entries = " ".join(f"{x:>14.6g}" for x in row)
        lines.append(f"{lbl:>7} {entries}")
    return lines


def format_matrix_dump(dae, z, t=0.0):
    """Plain-text labeled dump of E and the Jacobian blocks at (z, t)."""
    lay = dae.layout
    blocks = dae.jacobian(z, t)
    dyn = lay.dynamic_labels
    alg = lay.algebraic_labels
    lines = []
    lines += _format_block("E diag", np.diag(dae.E)[None, :],
                           ("",), lay.labels)
    lines += _format_block("F12", blocks.F12, dyn, alg)
    lines += _format_block("F21", blocks.F21, alg, dyn)
    lines += _format_block("F22", blocks.F22, alg, alg)
    return "\n".join(lines) + "\n"
