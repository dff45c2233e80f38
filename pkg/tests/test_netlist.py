"""Netlist parsing, canonical printing, and the reduced incidence matrix."""

import numpy as np
import pytest

from conftest import ALL_WELL_POSED, ILL_POSED, load_circuit

from memkit.devices import DeviceClass, eval_characteristic
from memkit.errors import NetlistError
from memkit.netlist import (format_netlist, parse_netlist,
                            reduced_incidence)

C = DeviceClass


def test_minimal_two_device_netlist():
    circuit = parse_netlist("V1 1 0 dc 1\nR1 1 0 r 1\n")
    assert [b.spec.dclass for b in circuit.branches] == [C.VSOURCE,
                                                         C.RESISTOR]
    assert circuit.nodes == ("1", "0")
    assert circuit.reference == "0"


def test_bare_value_without_kind_keyword():
    circuit = parse_netlist("R1 1 0 4.7\n V1 1 0 dc 0\n")
    char = circuit.branch("R1").spec.characteristic
    assert char.affine_coeff == 4.7


def test_builtin_phi_memristor_expansion():
    circuit = parse_netlist("MW1 1 0 chua_w\nG1 1 0 g 1\n")
    char = circuit.branch("MW1").spec.characteristic
    # i = W(phi) v with W(phi) = 1 + phi^2
    assert eval_characteristic(char, (0.0, 2.0, 0.0, 1.0)) \
        == pytest.approx(5.0)


def test_unknown_device_class():
    with pytest.raises(NetlistError, match="unknown device class"):
        parse_netlist("X1 1 0 foo\n")


@pytest.mark.parametrize("text, match", [
    ("MC1 1 0 expr sigma*q\nR1 1 0 r 1", "out of scope"),
    ("R1 1 1 r 1", "self-loop"),
    ("MQ1 1 0 expr v*i\nR1 1 0 r 1", "not allowed"),
    ("R1 1 0 r 1\nR1 1 0 r 2", "duplicate"),
    ("R1 1 0 r 1\nR2 2 3 r 1", "not connected"),
    ("R1 1 2 r 1", "reference node"),
    ("V1 1 0 dc 1\nV1x 1 0 ac 1", "unknown source waveform"),
    ("R1 1 0 r abc", "invalid element value"),
    ("R1 1 0", "device line"),
    ("MQ1 1 0 chua_w", "builds a"),
    ("MQ1 1 0 nosuch", "unknown builtin"),
    ("MC1 1 0 josephson_mc(1,2)", "4 argument"),
    ("MC1 1 0 josephson_mc(1,0,1,1)", "k1"),
    (".frobnicate 1", "unknown directive"),
    (".ic q(C9) 1\nR1 1 0 r 1", "unknown device"),
    (".ic phi(C1) 1\nC1 1 0 c 1\nR1 1 0 r 1", "no dynamic variable"),
    (".ic q(C1) 1\n.ic q(C1) 2\nC1 1 0 c 1\nG1 1 0 g 1", "duplicate .ic"),
    ("R1 1 0 expr i +", "in expression"),
])
def test_parse_errors(text, match):
    with pytest.raises(NetlistError, match=match):
        parse_netlist(text)


def test_error_carries_line_number():
    with pytest.raises(NetlistError, match="line 3"):
        parse_netlist("R1 1 0 r 1\nG1 1 0 g 1\nX9 1 0 zap\n")


def test_reference_directive_and_ics():
    circuit = parse_netlist(
        "R1 a b r 1\nC1 b a c 2\n.ref a\n.ic q(C1) 0.25\n")
    assert circuit.reference == "a"
    assert circuit.non_reference_nodes == ("b",)
    assert circuit.ics == {"q(C1)": 0.25}


def test_comments_and_blank_lines():
    circuit = parse_netlist(
        "# header\n\nR1 1 0 r 1  # trailing comment\nV1 1 0 dc 1\n")
    assert len(circuit.branches) == 2


def test_single_branch_incidence():
    inc = reduced_incidence(parse_netlist("R1 1 0 r 1\nG1 1 0 g 1\n"))
    assert inc.matrix.tolist() == [[1, 1]]
    assert inc.row_nodes == ("1",)


def test_triangle_incidence_matrix():
    # branches 1->2, 2->3, 3->1 with reference node 3
    text = "R1 1 2 r 1\nR2 2 3 r 1\nR3 3 1 r 1\n.ref 3\n"
    inc = reduced_incidence(parse_netlist(text))
    assert inc.row_nodes == ("1", "2")
    assert inc.matrix.tolist() == [[1, 0, -1], [-1, 1, 0]]


def test_reversed_branch_negates_column():
    fwd = reduced_incidence(parse_netlist("R1 1 2 r 1\nR2 2 0 r 1\n"))
    rev = reduced_incidence(parse_netlist("R1 2 1 r 1\nR2 2 0 r 1\n"))
    assert np.array_equal(fwd.matrix[:, 0], -rev.matrix[:, 0])


@pytest.mark.parametrize("name", ALL_WELL_POSED + ILL_POSED)
def test_column_sums_and_partition(name):
    circuit = load_circuit(name)
    inc = reduced_incidence(circuit)
    touches_ref = [circuit.reference in (b.pos, b.neg)
                   for b in circuit.branches]
    sums = inc.matrix.sum(axis=0)
    for total, touches in zip(sums, touches_ref):
        assert abs(total) == (1 if touches else 0)
    seen = sorted(j for cols in inc.column_partition.values() for j in cols)
    assert seen == list(range(len(circuit.branches)))
    # connected circuit: full row rank
    rank = np.linalg.matrix_rank(inc.matrix.astype(float))
    assert rank == len(circuit.non_reference_nodes)


@pytest.mark.parametrize("name", ALL_WELL_POSED + ILL_POSED)
def test_format_parse_fixed_point(name):
    circuit = load_circuit(name)
    canonical = format_netlist(circuit)
    assert format_netlist(parse_netlist(canonical)) == canonical


def test_format_covers_expression_and_builtin_devices():
    text = ("V1 1 0 sine 1 0.25\nMC1 1 2 josephson_mc(0.1,1,0.5,1)\n"
            "HW1 2 0 hybrid_parallel\nG1 2 0 expr 2*v + v^3\n")
    canonical = format_netlist(parse_netlist(text))
    assert "josephson_mc(0.1,1.0,0.5,1.0)" in canonical
    assert "hybrid_parallel" in canonical
    assert "expr" in canonical
    assert format_netlist(parse_netlist(canonical)) == canonical
