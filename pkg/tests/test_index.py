"""Index machinery: projectors, chain, Schur reductions, Kronecker oracle."""

import numpy as np
import pytest

from conftest import (ALL_WELL_POSED, DEGENERATE, NONDEGENERATE, load_circuit,
                      load_dae, random_state)

from memkit.errors import (HypothesisError, IllPosedError,
                           SingularPencilError)
from memkit.index import (Pencil, analyze, cutset_space_projector,
                          dae_pencil, index_one_test, is_nonsingular,
                          kronecker_oracle, loop_space_projector,
                          nullspace_basis, nullspace_projector,
                          pencil_state_dimension, schur_reduced_matrix,
                          structural_stage_two_projector,
                          tractability_chain)
from memkit.netlist import parse_netlist
from memkit.nodal import assemble
from memkit.sim import consistent_init


def _eval_point(name):
    """Deterministic evaluation point for a fixture circuit."""
    dae = load_dae(name)
    try:
        return dae, consistent_init(dae)
    except Exception:
        return dae, np.concatenate([dae.initial_state(),
                                    np.zeros(dae.layout.n_algebraic)])


def test_projector_of_identity_is_zero():
    q = nullspace_projector(np.eye(4))
    assert np.array_equal(q, np.zeros((4, 4)))


def test_projector_of_block_diagonal_identity_zero():
    m = np.diag([1.0, 1.0, 0.0, 0.0])
    q = nullspace_projector(m)
    assert np.allclose(q, np.diag([0.0, 0.0, 1.0, 1.0]))


def test_projector_of_rank_one_matrix():
    m = np.array([[1.0, 1.0], [1.0, 1.0]])
    q = nullspace_projector(m)
    # projects onto span{(1, -1)}
    assert np.allclose(q, [[0.5, -0.5], [-0.5, 0.5]])
    assert np.allclose(m @ q, 0.0)
    assert np.allclose(q @ q, q)
    direction = np.array([1.0, -1.0])
    assert np.allclose(q @ direction, direction)


def test_oblique_projector_properties(rng):
    m = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]])
    q = nullspace_projector(m, oblique=True, rng=rng)
    assert np.allclose(q @ q, q, atol=1e-12)
    assert np.allclose(m @ q, 0.0, atol=1e-12)
    kernel = nullspace_basis(m)
    assert np.allclose(q @ kernel, kernel, atol=1e-12)
    assert np.linalg.matrix_rank(q) == kernel.shape[1]
    # genuinely oblique in general: not symmetric
    assert not np.allclose(q, q.T)


def test_index_one_test_on_worked_examples():
    dae, z = _eval_point("gc_parallel")
    assert index_one_test(dae, z)
    dae, z = _eval_point("vc_loop")
    assert not index_one_test(dae, z)


def test_chain_on_ode_pencil(rng):
    f = rng.standard_normal((3, 3))
    result = tractability_chain(Pencil(np.eye(3), f))
    # nonsingular E resolves at the first stage
    assert result.index == 0
    assert np.array_equal(result.Q, np.zeros((3, 3)))
    assert is_nonsingular(result.E1)


def test_chain_on_differentiation_pencil():
    e = np.diag([1.0, 0.0])
    f = np.array([[0.0, 1.0], [1.0, 0.0]])
    result = tractability_chain(Pencil(e, f))
    assert result.index == 2
    assert not is_nonsingular(result.E1)
    assert is_nonsingular(result.E2)


def test_chain_index_one_when_algebraic_block_invertible():
    e = np.diag([1.0, 0.0])
    f = np.array([[0.0, 1.0], [1.0, 2.0]])
    assert tractability_chain(Pencil(e, f)).index == 1


def test_chain_on_vc_loop_pencil():
    dae, z = _eval_point("vc_loop")
    assert tractability_chain(dae_pencil(dae, z)).index == 2


def test_kronecker_oracle_toy_cases():
    assert kronecker_oracle(Pencil(np.eye(2), np.eye(2))) == 0
    e = np.diag([1.0, 0.0])
    assert kronecker_oracle(Pencil(e, np.array([[0., 1.], [1., 2.]]))) == 1
    assert kronecker_oracle(Pencil(e, np.array([[0., 1.], [1., 0.]]))) == 2
    # nilpotent shift block: index equals the matrix size
    shift = np.diag(np.ones(2), k=1)
    assert kronecker_oracle(Pencil(shift, np.eye(3))) == 3


def test_kronecker_oracle_rejects_singular_pencil():
    e = np.zeros((2, 2))
    f = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SingularPencilError):
        kronecker_oracle(Pencil(e, f))
    # two identical voltage sources in parallel: structurally singular
    dae = assemble(parse_netlist("V1 1 0 dc 1\nV2 1 0 dc 1\n"))
    z = np.zeros(dae.layout.n_total)
    with pytest.raises(SingularPencilError):
        kronecker_oracle(dae_pencil(dae, z))


def test_state_dimension_toy_cases():
    assert pencil_state_dimension(Pencil(np.eye(3), np.eye(3))) == 3
    e = np.diag([1.0, 0.0])
    f = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert pencil_state_dimension(Pencil(e, f)) == 0


def test_schur_index_one_worked_example():
    dae, z = _eval_point("gc_parallel")
    s = schur_reduced_matrix(dae, z, which="index1")
    assert np.allclose(s, [[2.0, 1.0], [-1.0, 0.0]])
    assert is_nonsingular(s)


def test_schur_collapses_without_vcm_branches():
    dae = assemble(parse_netlist("I1 1 0 dc 1\nG1 1 0 g 2\nR1 1 0 r 4\n"))
    z = np.zeros(dae.layout.n_total)
    s = schur_reduced_matrix(dae, z, which="index1")
    assert s.shape == (1, 1)
    assert s[0, 0] == pytest.approx(2.0 + 0.25)


@pytest.mark.parametrize("name", ALL_WELL_POSED)
def test_schur_index_one_agrees_with_f22(name):
    dae, z = _eval_point(name)
    try:
        s = schur_reduced_matrix(dae, z, which="index1")
    except HypothesisError:
        return
    assert is_nonsingular(s) == index_one_test(dae, z)


def test_schur_hypothesis_violation_reported():
    dae = assemble(parse_netlist("V1 1 0 dc 1\nL1 1 0 l 0\nR1 1 0 r 1\n"))
    z = np.zeros(dae.layout.n_total)
    with pytest.raises(HypothesisError, match="inductance of L1"):
        schur_reduced_matrix(dae, z, which="index1")


@pytest.mark.parametrize("name", DEGENERATE)
def test_schur_index_two_nonsingular_on_degenerate_fixtures(name):
    dae, z = _eval_point(name)
    s = schur_reduced_matrix(dae, z, which="index2")
    assert is_nonsingular(s)
    chain = tractability_chain(dae_pencil(dae, z))
    assert chain.index == 2


@pytest.mark.parametrize("name", DEGENERATE)
def test_structural_stage_two_projector_cross_check(name):
    """The topology-built stage-two projector must reproduce the generic
    SVD verdict: it projects onto ker E1 and yields a nonsingular E2."""
    dae, z = _eval_point(name)
    pencil = dae_pencil(dae, z)
    chain = tractability_chain(pencil)
    assert chain.index == 2
    q1 = structural_stage_two_projector(dae, z)
    e1 = chain.E1
    assert np.allclose(q1 @ q1, q1, atol=1e-10)
    assert np.allclose(e1 @ q1, 0.0, atol=1e-10)
    kernel = nullspace_basis(e1)
    assert np.linalg.matrix_rank(q1) == kernel.shape[1]
    assert np.allclose(q1 @ kernel, kernel, atol=1e-10)
    e2 = e1 - chain.F1 @ q1
    assert is_nonsingular(e2)


@pytest.mark.parametrize("name", DEGENERATE)
def test_structural_projectors_flag_the_right_space(name):
    dae, _ = _eval_point(name)
    report = analyze(load_circuit(name))
    q_hat = loop_space_projector(dae.incidence)
    q_bar = cutset_space_projector(dae.incidence)
    assert (np.any(q_hat) == (report.degeneracy.vcm_loop is not None))
    assert (np.any(q_bar) == (report.degeneracy.ilm_cutset is not None))


@pytest.mark.parametrize("name", ALL_WELL_POSED)
def test_projector_choice_does_not_change_the_index(name, rng):
    dae, z = _eval_point(name)
    pencil = dae_pencil(dae, z)
    orth = tractability_chain(pencil)
    obli = tractability_chain(pencil, oblique=True, rng=rng)
    assert orth.index == obli.index


@pytest.mark.parametrize("name", NONDEGENERATE)
def test_index_one_iff_nondegenerate(name):
    report = analyze(load_circuit(name))
    assert report.degeneracy.nondegenerate
    assert report.index_one
    assert report.tractability_index == 1


@pytest.mark.parametrize("name", DEGENERATE)
def test_degenerate_fixtures_are_index_two(name):
    report = analyze(load_circuit(name), with_oracle=True)
    assert not report.degeneracy.nondegenerate
    assert not report.index_one
    assert report.tractability_index == 2
    assert report.oracle_index == 2


@pytest.mark.parametrize("name", ALL_WELL_POSED)
def test_chain_matches_kronecker_oracle(name):
    dae, z = _eval_point(name)
    pencil = dae_pencil(dae, z)
    assert tractability_chain(pencil).index == kronecker_oracle(pencil)


def test_analyze_refuses_ill_posed_circuits():
    with pytest.raises(IllPosedError, match="voltage sources"):
        analyze(load_circuit("vv_loop"))
    with pytest.raises(IllPosedError, match="current sources"):
        analyze(load_circuit("i_cutset"))


def test_report_text_and_machine_format():
    report = analyze(load_circuit("vc_loop"), with_oracle=True)
    text = report.to_text()
    assert "degenerate: VCM-loop {V1, C1}" in text
    assert "tractability index: 2" in text
    assert "index one: no" in text
    assert "Kronecker oracle index: 2" in text
    machine = report.to_machine()
    assert "tractability_index=2" in machine
    assert "vcm_loop=V1,C1" in machine
    assert "index_one=no" in machine


def test_report_lists_the_evaluation_point():
    report = analyze(load_circuit("gc_decay"))
    assert "q(C1) = 1" in report.to_text()
    assert report.point_source.startswith("consistent")


def test_user_supplied_point_is_used():
    circuit = load_circuit("gc_parallel")
    z = np.array([1.0, 1.0, -2.0])
    report = analyze(circuit, point=z)
    assert report.point_source == "user-supplied"
    assert np.array_equal(report.point, z)
    with pytest.raises(ValueError, match="shape"):
        analyze(circuit, point=np.zeros(7))


def test_hypothesis_warnings_for_nonpassive_elements():
    report = analyze(parse_netlist("V1 1 0 dc 1\nR1 1 0 r -2\n"))
    assert any("resistance of R1" in w for w in report.warnings)
    report = analyze(parse_netlist("V1 1 0 dc 0\nR1 1 2 r 1\nL1 2 0 l 0\n"))
    assert any("inductance of L1 vanishes" in w for w in report.warnings)


def test_chain_artifacts_satisfy_projector_algebra():
    for name in ("vc_loop", "il_cutset", "full_zoo"):
        dae, z = _eval_point(name)
        pencil = dae_pencil(dae, z)
        chain = tractability_chain(pencil)
        e = pencil.E
        assert np.allclose(chain.Q @ chain.Q, chain.Q, atol=1e-10)
        assert np.allclose(e @ chain.Q, 0.0, atol=1e-10)
        if chain.Q1 is not None:
            assert np.allclose(chain.Q1 @ chain.Q1, chain.Q1, atol=1e-10)
            assert np.allclose(chain.E1 @ chain.Q1, 0.0, atol=1e-10)
