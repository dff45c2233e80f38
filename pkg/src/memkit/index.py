"""Differential-algebraic index analysis of the nodal model.

Three independent routes are provided:

* the index-one test: nonsingularity of the algebraic block F22 of the
  Jacobian (equivalently of E1 below);
* the tractability chain on the pencil (E, F): with Q a projector onto
  ker E, form E1 = E - F*Q; if E1 is singular, take any projector Q1 onto
  ker E1, F1 = F*(I - Q), and form E2 = E1 - F1*Q1.  The index is the
  first stage whose E-matrix is nonsingular (0 when E itself is).
* a shuffle-style Kronecker oracle: row-compress E, differentiate the
  algebraic rows by moving their F-part into E, and count the stages
  until E becomes nonsingular.  For regular pencils this equals the
  Kronecker (nilpotency) index and is used to cross-check the chain.

Structured reductions mirror the two theorem proofs: the index-one Schur
complement over (e, i_c, i_mc, i_u) and the index-two reduction built from
the loop-space projector onto ker(A_c A_mc A_u) and the cutset-space
projector onto ker(A_c A_mc A_u A_g A_w A_r A_m A_hm A_hw)^T.

Rank decisions use singular values with a relative threshold
(rank_tol * sigma_max, default rank_tol = 1e-10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import DeviceClass, INCREMENT_NAME
from .errors import (HypothesisError, IllPosedError, InitializationError,
                     NewtonError, SingularPencilError)
from .nodal import assemble
from .topology import degeneracy_report

__all__ = [
    "Pencil", "ChainResult", "IndexReport",
    "is_nonsingular", "nullspace_basis", "nullspace_projector",
    "tractability_chain", "kronecker_oracle", "pencil_state_dimension",
    "index_one_test", "schur_reduced_matrix",
    "loop_space_projector", "cutset_space_projector",
    "structural_stage_two_projector", "dae_pencil", "analyze",
]

C = DeviceClass

DEFAULT_RANK_TOL = 1e-10


def is_nonsingular(m, rank_tol=DEFAULT_RANK_TOL):
    """Numerical nonsingularity: smallest/largest singular value ratio
    above rank_tol.  The empty 0x0 matrix counts as nonsingular."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise ValueError("nonsingularity is defined for square matrices")
    if m.size == 0:
        return True
    s = np.linalg.svd(m, compute_uv=False)
    return s[0] > 0.0 and s[-1] > rank_tol * s[0]


def numerical_rank(m, rank_tol=DEFAULT_RANK_TOL, scale=None):
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    reference = s[0] if scale is None else scale
    if reference == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * reference))


def nullspace_basis(m, rank_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical kernel (columns)."""
    m = np.asarray(m, dtype=float)
    n = m.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if m.shape[0] == 0 or not np.any(m):
        return np.eye(n)
    _, s, vt = np.linalg.svd(m)
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return vt[rank:].T


def nullspace_projector(m, rank_tol=DEFAULT_RANK_TOL, oblique=False,
                        rng=None):
    """Projector Q with Q^2 = Q and image(Q) = ker(m).

    The default is the orthogonal projector K K^T from an SVD kernel
    basis K.  With ``oblique=True`` a randomized oblique projector onto
    the same kernel is built instead (any projector onto the kernel is
    admissible for the tractability chain; the index must not depend on
    the choice).
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[1]
    kernel = nullspace_basis(m, rank_tol)
    if kernel.shape[1] == 0:
        return np.zeros((n, n))
    if not oblique:
        return kernel @ kernel.T
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(32):
        probe = kernel + 0.4 * rng.standard_normal(kernel.shape)
        gram = probe.T @ kernel
        s = np.linalg.svd(gram, compute_uv=False)
        if s[-1] > 1e-6 * s[0]:
            return kernel @ np.linalg.solve(gram, probe.T)
    raise np.linalg.LinAlgError("could not build an oblique projector")


@dataclass(frozen=True)
class Pencil:
    """Matrix pencil lambda*E - F."""

    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.E, dtype=float)
        f = np.asarray(self.F, dtype=float)
        if e.shape != f.shape or e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("pencil needs two equal square matrices")
        object.__setattr__(self, "E", e)
        object.__setattr__(self, "F", f)

    @property
    def size(self):
        return self.E.shape[0]


@dataclass(frozen=True)
class ChainResult:
    """Artifacts of one tractability-chain run.

    ``index`` is 0, 1 or 2, or None when the chain is unresolved (index
    above two, or assumptions violated).  Matrices beyond the resolving
    stage are None.
    """

    index: int | None
    Q: np.ndarray
    E1: np.ndarray
    Q1: np.ndarray | None = None
    F1: np.ndarray | None = None
    E2: np.ndarray | None = None


def tractability_chain(pencil, rank_tol=DEFAULT_RANK_TOL, oblique=False,
                       rng=None):
    """Run the projector chain E1 = E - F Q, E2 = E1 - F1 Q1 on a pencil."""
    e, f = pencil.E, pencil.F
    if is_nonsingular(e, rank_tol):
        n = pencil.size
        return ChainResult(index=0, Q=np.zeros((n, n)), E1=e.copy())
    q = nullspace_projector(e, rank_tol, oblique=oblique, rng=rng)
    e1 = e - f @ q
    if is_nonsingular(e1, rank_tol):
        return ChainResult(index=1, Q=q, E1=e1)
    q1 = nullspace_projector(e1, rank_tol, oblique=oblique, rng=rng)
    f1 = f @ (np.eye(pencil.size) - q)
    e2 = e1 - f1 @ q1
    index = 2 if is_nonsingular(e2, rank_tol) else None
    return ChainResult(index=index, Q=q, E1=e1, Q1=q1, F1=f1, E2=e2)


def _regular_sample(pencil, rank_tol, rng):
    """A lambda with lambda*E - F comfortably nonsingular, or None."""
    e, f = pencil.E, pencil.F
    scale = max(np.linalg.norm(f), 1.0) / max(np.linalg.norm(e), 1e-30)
    best = None
    for _ in range(12):
        lam = scale * rng.uniform(0.25, 4.0) * rng.choice((-1.0, 1.0))
        m = lam * e - f
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] > 0 and s[-1] > rank_tol * s[0]:
            ratio = s[-1] / s[0]
            if best is None or ratio > best[1]:
                best = (lam, ratio)
    return None if best is None else best[0]


def kronecker_oracle(pencil, rank_tol=DEFAULT_RANK_TOL):
    """Kronecker (nilpotency) index by shuffle-style row reduction.

    Each stage row-compresses E (SVD), replaces the vanished rows of E by
    the corresponding rows of F (differentiating those constraints), and
    zeroes their F-part.  The index is the number of stages until E is
    nonsingular; 0 for nonsingular E.  Raises
    :class:`SingularPencilError` when det(lambda E - F) vanishes
    identically (sampled over random lambda).
    """
    n = pencil.size
    if n == 0:
        return 0
    rng = np.random.default_rng(0x5EED)
    if _regular_sample(pencil, rank_tol, rng) is None:
        raise SingularPencilError(
            "det(lambda*E - F) vanishes at all sampled lambda; "
            "the pencil is singular and has no Kronecker index")
    e = pencil.E.copy()
    f = pencil.F.copy()
    for stage in range(n + 1):
        if is_nonsingular(e, rank_tol):
            return stage
        u, s, _ = np.linalg.svd(e)
        rank = int(np.count_nonzero(s > rank_tol * s[0])) if s[0] > 0 else 0
        e_rot = u.T @ e
        f_rot = u.T @ f
        e = np.vstack([e_rot[:rank], f_rot[rank:]])
        f = np.vstack([f_rot[:rank], np.zeros((n - rank, n))])
    raise SingularPencilError(
        "shuffle reduction did not terminate; the pencil is numerically "
        "singular")


def pencil_state_dimension(pencil, rank_tol=DEFAULT_RANK_TOL):
    """Dynamic degrees of freedom of a regular pencil.

    Counts the finite (slow) part of the pencil as the stabilized rank of
    powers of (lambda0 E - F)^-1 E; in the index-one case this equals the
    circuit's order of complexity.
    """
    n = pencil.size
    if n == 0:
        return 0
    rng = np.random.default_rng(0xD1A6)
    lam = _regular_sample(pencil, rank_tol, rng)
    if lam is None:
        raise SingularPencilError("singular pencil has no state dimension")
    w = np.linalg.solve(lam * pencil.E - pencil.F, pencil.E)
    smax = np.linalg.svd(w, compute_uv=False)[0]
    if smax == 0.0:
        return 0
    power = np.eye(n)
    previous = n
    for k in range(1, n + 2):
        power = power @ w
        rank = numerical_rank(power, rank_tol, scale=smax ** k)
        if rank == previous:
            return rank
        previous = rank
    return previous


def dae_pencil(dae, z, t=0.0):
    """Pencil (E, F) of the nodal model linearized at (z, t)."""
    return Pencil(E=dae.E, F=dae.jacobian(z, t).full)


def index_one_test(dae, z, t=0.0, rank_tol=DEFAULT_RANK_TOL):
    """True iff the algebraic Jacobian block F22 is nonsingular at z."""
    return is_nonsingular(dae.jacobian(z, t).F22, rank_tol)


def _condition(m):
    if m.size == 0:
        return 1.0
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def theorem_hypothesis_warnings(dae, z):
    """Pointwise checks of the theorem hypotheses at z.

    The incremental capacitances and (mem)inductances must be nonsingular
    (positive definite for the index-two characterization); resistances,
    conductances, memristances and memductances must be positive (strict
    local passivity).  Violations are reported, never enforced.
    """
    inc = dae.incremental_matrices(z)
    warnings = []
    groups = {
        "C": C.CAPACITOR, "Cm": C.MEMCAPACITOR,
        "L": C.INDUCTOR, "Lm": C.MEMINDUCTOR,
        "R": C.RESISTOR, "G": C.CONDUCTOR,
        "M": C.Q_MEMRISTOR, "W": C.PHI_MEMRISTOR,
        "Mh": C.HYBRID_M, "Wh": C.HYBRID_W,
    }
    reactive = ("C", "Cm", "L", "Lm")
    for key, dclass in groups.items():
        names = [b.name for b in dae.circuit.devices_of(dclass)]
        diag = np.diag(inc[key])
        for name, value in zip(names, diag):
            quantity = INCREMENT_NAME[dclass]
            if key in reactive:
                if value == 0.0:
                    warnings.append(
                        f"incremental {quantity} of {name} vanishes at the "
                        "evaluation point (theorems assume it nonsingular)")
                elif value < 0.0:
                    warnings.append(
                        f"incremental {quantity} of {name} is negative at "
                        "the evaluation point (the index-two "
                        "characterization assumes positive definiteness)")
            elif value <= 0.0:
                warnings.append(
                    f"incremental {quantity} of {name} is {value:g} at the "
                    "evaluation point (theorems assume strict local "
                    "passivity)")
    return warnings


def _inverse_diag(name, matrix, devices):
    diag = np.diag(matrix)
    zero = [b.name for b, d in zip(devices, diag) if d == 0.0]
    if zero:
        raise HypothesisError(
            f"cannot form the reduction: incremental {name} of "
            f"{', '.join(zero)} vanishes at the evaluation point")
    return np.diag(1.0 / diag) if diag.size else matrix


def loop_space_projector(incidence, rank_tol=DEFAULT_RANK_TOL):
    """Orthogonal projector onto ker(A_c A_mc A_u): nontrivial exactly in
    the presence of VCM-loops."""
    stack = incidence.block(C.CAPACITOR, C.MEMCAPACITOR, C.VSOURCE)
    return nullspace_projector(stack, rank_tol)


def cutset_space_projector(incidence, rank_tol=DEFAULT_RANK_TOL):
    """Orthogonal projector onto the kernel of the transposed non-ILM
    column stack: nontrivial exactly in the presence of ILM-cutsets."""
    stack = incidence.block(C.CAPACITOR, C.MEMCAPACITOR, C.VSOURCE,
                            C.CONDUCTOR, C.PHI_MEMRISTOR, C.RESISTOR,
                            C.Q_MEMRISTOR, C.HYBRID_M, C.HYBRID_W)
    return nullspace_projector(stack.T, rank_tol)


def schur_reduced_matrix(dae, z, which="index1", t=0.0,
                         rank_tol=DEFAULT_RANK_TOL):
    """Structured reduced matrix whose nonsingularity matches the
    corresponding index verdict.

    ``which="index1"``: the Schur complement of the algebraic Jacobian
    over the variables (e, i_c, i_mc, i_u), eliminating the resistive and
    memristive currents through their (inverted) incremental matrices.

    ``which="index2"``: the three-block reduction of the stage-two chain
    matrix, built from the loop- and cutset-space projectors.
    """
    inc = dae.incremental_matrices(z)
    blk = dae.incidence.block
    circuit = dae.circuit
    r_inv = _inverse_diag("resistance", inc["R"],
                          circuit.devices_of(C.RESISTOR))
    m_inv = _inverse_diag("memristance", inc["M"],
                          circuit.devices_of(C.Q_MEMRISTOR))
    mh_inv = _inverse_diag("hybrid memristance", inc["Mh"],
                           circuit.devices_of(C.HYBRID_M))
    ag, aw = blk(C.CONDUCTOR), blk(C.PHI_MEMRISTOR)
    ar, am, ahm, ahw = (blk(C.RESISTOR), blk(C.Q_MEMRISTOR),
                        blk(C.HYBRID_M), blk(C.HYBRID_W))
    ac, amc, au = blk(C.CAPACITOR), blk(C.MEMCAPACITOR), blk(C.VSOURCE)
    conductance_like = (ag @ inc["G"] @ ag.T + aw @ inc["W"] @ aw.T
                        + ar @ r_inv @ ar.T + am @ m_inv @ am.T
                        + ahm @ mh_inv @ ahm.T + ahw @ inc["Wh"] @ ahw.T)
    m = conductance_like.shape[0]
    nc, nmc, nu = ac.shape[1], amc.shape[1], au.shape[1]
    if which == "index1":
        for key, name, cls in (("C", "capacitance", C.CAPACITOR),
                               ("Cm", "memcapacitance", C.MEMCAPACITOR),
                               ("L", "inductance", C.INDUCTOR),
                               ("Lm", "meminductance", C.MEMINDUCTOR)):
            _inverse_diag(name, inc[key], circuit.devices_of(cls))
        size = m + nc + nmc + nu
        s = np.zeros((size, size))
        s[:m, :m] = conductance_like
        s[:m, m:m + nc] = ac
        s[:m, m + nc:m + nc + nmc] = amc
        s[:m, m + nc + nmc:] = au
        s[m:m + nc, :m] = -ac.T
        s[m + nc:m + nc + nmc, :m] = -amc.T
        s[m + nc + nmc:, :m] = -au.T
        return s
    if which != "index2":
        raise ValueError("which must be 'index1' or 'index2'")
    l_inv = _inverse_diag("inductance", inc["L"],
                          circuit.devices_of(C.INDUCTOR))
    lm_inv = _inverse_diag("meminductance", inc["Lm"],
                           circuit.devices_of(C.MEMINDUCTOR))
    al, aml = blk(C.INDUCTOR), blk(C.MEMINDUCTOR)
    q_bar = cutset_space_projector(dae.incidence, rank_tol)
    q_hat = loop_space_projector(dae.incidence, rank_tol)
    a2m2a2t = al @ l_inv @ al.T + aml @ lm_inv @ aml.T
    top_left = conductance_like + a2m2a2t @ q_bar
    m3 = np.zeros((nc + nmc, nc + nmc))
    m3[:nc, :nc] = inc["C"]
    m3[nc:, nc:] = inc["Cm"]
    a3 = np.hstack([ac, amc])
    q_tilde = q_hat[:nc + nmc, :nc + nmc]
    q_check = q_hat[:nc + nmc, nc + nmc:]
    size = m + nc + nmc + nu
    s = np.zeros((size, size))
    s[:m, :m] = top_left
    s[:m, m:m + nc + nmc] = a3
    s[:m, m + nc + nmc:] = au
    s[m:m + nc + nmc, :m] = -m3 @ a3.T
    s[m:m + nc + nmc, m:m + nc + nmc] = q_tilde
    s[m:m + nc + nmc, m + nc + nmc:] = q_check
    s[m + nc + nmc:, :m] = -au.T
    return s


def structural_stage_two_projector(dae, z, t=0.0,
                                   rank_tol=DEFAULT_RANK_TOL):
    """Stage-two projector built from the circuit topology.

    Under the theorem hypotheses ker E1 is spanned by node-potential
    directions in the cutset space together with (i_c, i_mc, i_u)
    directions in the loop space, lifted through F12.  Used as a
    cross-check of the generic SVD projector; the generic path is
    authoritative.
    """
    lay = dae.layout
    r, p = lay.n_dynamic, lay.n_algebraic
    q_bar = cutset_space_projector(dae.incidence, rank_tol)
    q_hat = loop_space_projector(dae.incidence, rank_tol)
    qb = np.zeros((p, p))
    e_sl = lay.yslice("e")
    qb[e_sl, e_sl] = q_bar
    start = lay.yslice("i_c").start
    stop = lay.yslice("i_u").stop
    qb[start:stop, start:stop] = q_hat
    qa = dae.jacobian(z, t).F12 @ qb
    q1 = np.zeros((r + p, r + p))
    q1[:r, r:] = qa
    q1[r:, r:] = qb
    return q1


@dataclass
class IndexReport:
    """Outcome of the full index analysis of one circuit."""

    degeneracy: object
    labels: tuple
    point: np.ndarray
    point_source: str
    t: float
    index_one: bool
    f22_condition: float
    chain: ChainResult
    schur_which: str
    schur_matrix: np.ndarray | None
    schur_nonsingular: bool | None
    schur_note: str | None
    oracle_index: int | None
    oracle_note: str | None
    state_order_sum: int
    state_dimension: int | None
    warnings: tuple

    @property
    def tractability_index(self):
        return self.chain.index

    def _index_text(self):
        if self.chain.index is None:
            return "unresolved (above two, or assumptions violated)"
        return str(self.chain.index)

    def to_text(self):
        lines = list(self.degeneracy.lines())
        lines.append(f"evaluation point: {self.point_source} (t={self.t:g})")
        for label, value in zip(self.labels, self.point):
            lines.append(f"  {label} = {value:.12g}")
        lines.append(f"F22 condition estimate: {self.f22_condition:.6g}")
        lines.append("index one: " + ("yes" if self.index_one else "no"))
        lines.append(f"tractability index: {self._index_text()}")
        if self.schur_matrix is not None:
            verdict = ("nonsingular" if self.schur_nonsingular
                       else "singular")
            lines.append(f"schur reduction ({self.schur_which}): {verdict}")
        else:
            lines.append(f"schur reduction ({self.schur_which}): "
                         f"not available ({self.schur_note})")
        lines.append(f"state order sum: {self.state_order_sum}")
        if self.state_dimension is not None:
            lines.append(f"state dimension (pencil): {self.state_dimension}")
        if self.oracle_index is not None:
            lines.append(f"Kronecker oracle index: {self.oracle_index}")
        elif self.oracle_note is not None:
            lines.append(f"Kronecker oracle: failed ({self.oracle_note})")
        for warning in self.warnings:
            lines.append(f"warning: {warning}")
        return "\n".join(lines) + "\n"

    def machine_items(self):
        yield from self.degeneracy.machine_items()
        yield "eval_point_source", self.point_source
        yield "eval_t", f"{self.t:.17g}"
        for label, value in zip(self.labels, self.point):
            yield f"point.{label}", f"{value:.17g}"
        yield "f22_condition", f"{self.f22_condition:.17g}"
        yield "index_one", "yes" if self.index_one else "no"
        yield "tractability_index", (
            "unresolved" if self.chain.index is None
            else str(self.chain.index))
        yield "schur_which", self.schur_which
        if self.schur_nonsingular is None:
            yield "schur_nonsingular", "unavailable"
        else:
            yield ("schur_nonsingular",
                   "yes" if self.schur_nonsingular else "no")
        yield "state_order_sum", str(self.state_order_sum)
        if self.state_dimension is not None:
            yield "state_dimension", str(self.state_dimension)
        if self.oracle_index is not None:
            yield "oracle_index", str(self.oracle_index)
        for k, warning in enumerate(self.warnings):
            yield f"warning.{k}", warning

    def to_machine(self):
        return "\n".join(f"{k}={v}" for k, v in self.machine_items()) + "\n"


def analyze(circuit, point=None, t=0.0, rank_tol=DEFAULT_RANK_TOL,
            with_oracle=False):
    """Full index analysis: degeneracy, F22 test, chain, Schur, oracle.

    The evaluation point is, in order of preference: the user-supplied
    ``point``, a consistent completion of the `.ic`/zero dynamic state, or
    the raw stacked point with the algebraic part zeroed (reported as
    such) when consistent initialization is refused or fails.
    Ill-posed circuits (voltage-source loops, current-source cutsets) are
    refused.
    """
    deg = degeneracy_report(circuit)
    if not deg.well_posed:
        from .topology import format_witness
        if deg.v_loop:
            detail = "loop of voltage sources " + format_witness(deg.v_loop)
            witness = deg.v_loop
        else:
            detail = ("cutset of current sources "
                      + format_witness(deg.i_cutset))
            witness = deg.i_cutset
        raise IllPosedError(f"ill-posed circuit: {detail}", witness)
    dae = assemble(circuit)
    lay = dae.layout
    if point is not None:
        z = np.asarray(point, dtype=float)
        if z.shape != (lay.n_total,):
            raise ValueError(f"evaluation point has shape {z.shape}, "
                             f"expected ({lay.n_total},)")
        source = "user-supplied"
    else:
        from .sim import SolverConfig, consistent_init
        x0 = dae.initial_state()
        try:
            z = consistent_init(dae, x0, t,
                                SolverConfig(rank_tol=rank_tol))
            source = "consistent completion of the `.ic`/zero dynamic state"
        except (InitializationError, NewtonError):
            z = np.concatenate([x0, np.zeros(lay.n_algebraic)])
            source = ("raw `.ic`/zero dynamic state with zeroed algebraic "
                      "part (consistent completion unavailable)")
    blocks = dae.jacobian(z, t)
    f22 = blocks.F22
    index_one = is_nonsingular(f22, rank_tol)
    chain = tractability_chain(Pencil(dae.E, blocks.full), rank_tol)
    which = "index1" if deg.nondegenerate else "index2"
    schur = schur_nonsingular = schur_note = None
    try:
        schur = schur_reduced_matrix(dae, z, which=which, t=t,
                                     rank_tol=rank_tol)
        schur_nonsingular = is_nonsingular(schur, rank_tol)
    except HypothesisError as err:
        schur_note = str(err)
    oracle_index = oracle_note = None
    if with_oracle:
        try:
            oracle_index = kronecker_oracle(Pencil(dae.E, blocks.full),
                                            rank_tol)
        except SingularPencilError as err:
            oracle_note = str(err)
    try:
        state_dim = pencil_state_dimension(Pencil(dae.E, blocks.full),
                                           rank_tol)
    except SingularPencilError:
        state_dim = None
    return IndexReport(
        degeneracy=deg, labels=lay.labels, point=z, point_source=source,
        t=t, index_one=index_one, f22_condition=_condition(f22),
        chain=chain, schur_which=which, schur_matrix=schur,
        schur_nonsingular=schur_nonsingular, schur_note=schur_note,
        oracle_index=oracle_index, oracle_note=oracle_note,
        state_order_sum=dae.state_order_sum(), state_dimension=state_dim,
        warnings=tuple(theorem_hypothesis_warnings(dae, z)))
