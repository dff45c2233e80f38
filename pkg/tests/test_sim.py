"""Newton solver, consistent initialization, backward-Euler integration."""

import io
import math

import numpy as np
import pytest

from conftest import load_circuit, load_dae

from memkit.devices import DEFAULT_FLUX_MAP
from memkit.errors import (InitializationError, NonConvergenceError,
                           SimulationError, SingularJacobianError)
from memkit.netlist import parse_netlist
from memkit.nodal import assemble
from memkit.sim import (SolverConfig, Trace, consistent_init, newton_solve,
                        simulate, step_backward_euler)


def test_newton_scalar_quadratic():
    config = SolverConfig(newton_tol=1e-12)
    root = newton_solve(lambda x: x * x - 4.0, lambda x: 2.0 * x,
                        np.array([3.0]), config)
    assert abs(root[0] - 2.0) <= 1e-12


def test_newton_linear_system_converges_in_one_iteration():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    calls = {"jacobian": 0}

    def jacobian(x):
        calls["jacobian"] += 1
        return a

    x = newton_solve(lambda x: a @ x - b, jacobian,
                     np.array([10.0, -10.0]), SolverConfig())
    assert np.allclose(a @ x, b)
    assert calls["jacobian"] == 1


def test_newton_singular_jacobian():
    with pytest.raises(SingularJacobianError):
        newton_solve(lambda x: x * x - 4.0, lambda x: 2.0 * x,
                     np.array([0.0]), SolverConfig())


def test_newton_nonconvergence_reports_iterations():
    config = SolverConfig(newton_max_iter=3, newton_tol=1e-15)
    with pytest.raises(NonConvergenceError) as info:
        # cycle of Newton for x^3 - 2x + 2 from 0: oscillates 0 -> 1 -> 0
        newton_solve(lambda x: x ** 3 - 2 * x + 2.0,
                     lambda x: 3 * x ** 2 - 2.0, np.array([0.0]), config)
    assert info.value.iterations == 3


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(h=0.0)
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(newton_max_iter=0)


def test_consistent_init_worked_example():
    dae = assemble(parse_netlist("G1 1 0 g 2\nC1 1 0 c 1\n"))
    z0 = consistent_init(dae, x0=np.array([2.0]))
    # charge 2 on a unit capacitor: e = 2, conductor draws 4, so i_c = -4
    assert np.allclose(z0, [2.0, 2.0, -4.0])


def test_consistent_init_zero_state_source_free():
    dae = assemble(parse_netlist("G1 1 0 g 1\nC1 1 0 c 1\nL1 1 0 l 1\n"))
    assert np.allclose(consistent_init(dae), 0.0)


def test_consistent_init_refuses_index_two():
    dae = load_dae("vc_loop")
    with pytest.raises(InitializationError) as info:
        consistent_init(dae)
    assert "VCM-loop {V1, C1}" in str(info.value)
    assert info.value.witness == ("V1", "C1")


def test_backward_euler_single_step_closed_form():
    dae = assemble(parse_netlist("G1 1 0 g 1\nC1 1 0 c 1\n"))
    h = 0.125
    z0 = consistent_init(dae, x0=np.array([1.0]))
    z1 = step_backward_euler(dae, z0, 0.0, h, SolverConfig(h=h))
    e_label = dae.layout.index_of("e(1)")
    assert z1[e_label] == pytest.approx(1.0 / (1.0 + h), abs=1e-12)


def test_backward_euler_linear_circuit_one_newton_iteration():
    dae = assemble(parse_netlist("G1 1 0 g 1\nC1 1 0 c 1\n"))
    z0 = consistent_init(dae, x0=np.array([1.0]))
    config = SolverConfig(newton_max_iter=1)
    z1 = step_backward_euler(dae, z0, 0.0, 1e-2, config)
    assert np.isfinite(z1).all()


def test_backward_euler_tiny_step_stays_put():
    dae = load_dae("vrl_series")
    z0 = consistent_init(dae)
    z1 = step_backward_euler(dae, z0, 0.0, 1e-8, SolverConfig())
    assert np.max(np.abs(z1 - z0)) <= 1e-6


def test_simulate_rc_decay_matches_analytic():
    dae = load_dae("gc_decay")
    trace = simulate(dae, t_stop=1.0, config=SolverConfig(h=1e-3))
    assert abs(trace.column("e(1)")[-1] - math.exp(-1.0)) <= 1e-3


def test_simulate_zero_source_zero_trace():
    dae = assemble(parse_netlist("G1 1 0 g 1\nC1 1 0 c 1\nR1 1 0 r 1\n"))
    trace = simulate(dae, t_stop=0.1, config=SolverConfig(h=1e-2))
    assert np.allclose(trace.states, 0.0)


def test_simulate_first_order_convergence():
    dae = load_dae("gc_decay")
    errors = []
    for h in (1e-2, 1e-3, 1e-4):
        trace = simulate(dae, t_stop=1.0, config=SolverConfig(h=h))
        errors.append(abs(trace.column("e(1)")[-1] - math.exp(-1.0)))
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine == pytest.approx(10.0, rel=0.2)


def test_simulate_chua_memristor_constitutive_consistency():
    config = SolverConfig(h=1e-3)
    dae = load_dae("mq_drive")
    trace = simulate(dae, t_stop=2.0, config=config)
    q = trace.column("q(MQ1)")
    i = trace.column("i(MQ1)")
    v = trace.column("e(2)")  # memristor hangs between node 2 and ground
    memristance = np.array([DEFAULT_FLUX_MAP.diff("q").eval({"q": qk})
                            for qk in q])
    assert np.max(np.abs(memristance * i - v)) <= 10 * config.newton_tol
    assert np.max(np.abs(q)) < 10.0


def _branch_currents(dae, z, t):
    """All branch currents in declaration order, eliminated ones included."""
    from memkit.devices import DeviceClass as DC
    lay = dae.layout
    e = z[lay.n_dynamic:][lay.yslice("e")]
    cur = {}
    for block, cls in (("i_c", DC.CAPACITOR), ("i_mc", DC.MEMCAPACITOR),
                       ("i_u", DC.VSOURCE), ("i_l", DC.INDUCTOR),
                       ("i_ml", DC.MEMINDUCTOR), ("i_r", DC.RESISTOR),
                       ("i_m", DC.Q_MEMRISTOR), ("i_hm", DC.HYBRID_M),
                       ("i_hw", DC.HYBRID_W)):
        values = z[lay.zslice(block)]
        for k, (_, branch) in enumerate(
                [(j, b) for j, b in enumerate(dae.circuit.branches)
                 if b.spec.dclass is cls]):
            cur[branch.name] = values[k]
    out = []
    for j, branch in enumerate(dae.circuit.branches):
        cls = branch.spec.dclass
        if branch.name in cur:
            out.append(cur[branch.name])
            continue
        v = dae.incidence.matrix[:, j].astype(float) @ e
        if cls is DC.ISOURCE:
            out.append(branch.spec.waveform.value(t))
        elif cls is DC.CONDUCTOR:
            out.append(branch.spec.characteristic.value(v=v))
        elif cls is DC.PHI_MEMRISTOR:
            label = f"phi({branch.name})"
            phi = z[lay.index_of(label)]
            out.append(branch.spec.characteristic.value(phi=phi, v=v))
        else:
            raise AssertionError(cls)
    return np.array(out)


def test_kcl_conservation_along_trace():
    config = SolverConfig(h=1e-3)
    dae = load_dae("full_zoo")
    trace = simulate(dae, t_stop=0.5, config=config)
    a = dae.incidence.matrix.astype(float)
    worst = 0.0
    for t, z in zip(trace.times, trace.states):
        currents = _branch_currents(dae, z, t)
        worst = max(worst, np.max(np.abs(a @ currents)))
    assert worst <= config.newton_tol


def test_simulation_error_names_the_time():
    # an infeasible constraint (sine source across a diode-like resistor
    # with bounded voltage) cannot converge; expect a step failure report
    dae = assemble(parse_netlist(
        "V1 1 0 sine 10 0.25\nR1 1 0 expr i^3\n"))
    config = SolverConfig(h=0.5, newton_max_iter=4)
    with pytest.raises(SimulationError, match="t="):
        simulate(dae, t_stop=2.0, config=config)


def test_simulate_refuses_index_two_circuit():
    dae = load_dae("cc_loop")
    with pytest.raises(InitializationError):
        simulate(dae, t_stop=0.1)


def test_trace_csv_format():
    dae = load_dae("gc_decay")
    trace = simulate(dae, t_stop=0.01, config=SolverConfig(h=1e-2))
    buffer = io.StringIO()
    trace.to_csv(buffer)
    text = buffer.getvalue()
    lines = text.splitlines()
    assert lines[0] == "t,q(C1),e(1),i(C1)"
    assert text.endswith("\n")
    assert len(lines) == len(trace.times) + 1
    # 17 significant digits round-trip exactly
    value = float(lines[1].split(",")[1])
    assert value == trace.states[0, 0]


def test_trace_validation():
    with pytest.raises(ValueError):
        Trace(times=np.array([0.0, 0.0]), states=np.zeros((2, 1)),
              labels=("x",))
    with pytest.raises(ValueError):
        Trace(times=np.array([0.0, 1.0]), states=np.zeros((2, 2)),
              labels=("x",))


def test_simulate_rejects_bad_horizon():
    dae = load_dae("gc_decay")
    with pytest.raises(ValueError):
        simulate(dae, t_stop=0.0)
