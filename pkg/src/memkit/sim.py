"""Consistent initialization and fixed-step backward-Euler integration.

Index-one semiexplicit DAEs are integrated with the implicit Euler scheme:
per step the coupled system

    x_next - x - h * f(x_next, y_next, t+h) = 0
    g(x_next, y_next, t+h) = 0

is solved by a full-step Newton iteration started at the previous state.
Index-two circuits are refused at initialization rather than silently
drifting on their hidden constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (InitializationError, NewtonError, NonConvergenceError,
                     SimulationError, SingularJacobianError)
from .index import DEFAULT_RANK_TOL, is_nonsingular
from .topology import degeneracy_report

__all__ = [
    "SolverConfig", "Trace", "newton_solve", "consistent_init",
    "step_backward_euler", "simulate",
]


@dataclass(frozen=True)
class SolverConfig:
    h: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("step size h must be positive")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.rank_tol <= 0.0:
            raise ValueError("rank_tol must be positive")


def newton_solve(residual_fn, jacobian_fn, guess, config=None):
    """Full-step Newton iteration to the infinity-norm tolerance."""
    config = config or SolverConfig()
    z = np.atleast_1d(np.asarray(guess, dtype=float)).copy()
    for iteration in range(config.newton_max_iter + 1):
        residual = np.atleast_1d(np.asarray(residual_fn(z), dtype=float))
        norm = float(np.max(np.abs(residual))) if residual.size else 0.0
        if norm <= config.newton_tol:
            return z
        if iteration == config.newton_max_iter:
            raise NonConvergenceError(iteration, norm)
        jacobian = np.atleast_2d(np.asarray(jacobian_fn(z), dtype=float))
        try:
            step = np.linalg.solve(jacobian, residual)
        except np.linalg.LinAlgError:
            raise SingularJacobianError(
                "singular Jacobian at a Newton iterate") from None
        z = z - step
    raise AssertionError("unreachable")


def _cached_evaluation(dae, t):
    """Residual/Jacobian pair sharing one characteristic sweep per point."""
    cache = {}

    def both(z):
        key = z.tobytes()
        if cache.get("key") != key:
            cache["key"] = key
            cache["value"] = dae.residual_and_jacobian(z, t)
        return cache["value"]

    return both


def consistent_init(dae, x0=None, t0=0.0, config=None):
    """Complete dynamic values x0 with algebraic values solving the
    constraint rows at t0.

    Refused when the algebraic Jacobian F22 is singular at the initial
    point (an index-two configuration); the error names the degeneracy
    witness.
    """
    config = config or SolverConfig()
    lay = dae.layout
    x0 = dae.initial_state() if x0 is None else \
        np.asarray(x0, dtype=float).copy()
    if x0.shape != (lay.n_dynamic,):
        raise ValueError(f"dynamic state has shape {x0.shape}, expected "
                         f"({lay.n_dynamic},)")
    r = lay.n_dynamic
    probe = np.concatenate([x0, np.zeros(lay.n_algebraic)])
    if not is_nonsingular(dae.jacobian(probe, t0).F22, config.rank_tol):
        deg = degeneracy_report(dae.circuit)
        if deg.nondegenerate:
            detail = ("the circuit is topologically nondegenerate, so an "
                      "incremental matrix is singular at this point")
        else:
            detail = deg.summary()
        witness = (deg.vcm_loop or ()) + (deg.ilm_cutset or ())
        raise InitializationError(
            "consistent initialization refused: the algebraic Jacobian is "
            f"singular at the initial point ({detail})", witness)

    both = _cached_evaluation(dae, t0)

    def residual_fn(y):
        return both(np.concatenate([x0, y]))[0][r:]

    def jacobian_fn(y):
        return both(np.concatenate([x0, y]))[1].F22

    y0 = newton_solve(residual_fn, jacobian_fn,
                      np.zeros(lay.n_algebraic), config)
    return np.concatenate([x0, y0])


def step_backward_euler(dae, z, t, h, config=None):
    """One implicit Euler step from (z, t) to t + h."""
    config = config or SolverConfig()
    z = np.asarray(z, dtype=float)
    lay = dae.layout
    r = lay.n_dynamic
    t_next = t + h
    both = _cached_evaluation(dae, t_next)
    x_prev = z[:r]
    eye_r = np.eye(r)

    def residual_fn(zn):
        res = both(zn)[0].copy()
        res[:r] = zn[:r] - x_prev - h * res[:r]
        return res

    def jacobian_fn(zn):
        blocks = both(zn)[1]
        n = lay.n_total
        jac = np.zeros((n, n))
        jac[:r, :r] = eye_r
        jac[:r, r:] = -h * blocks.F12
        jac[r:, :r] = blocks.F21
        jac[r:, r:] = blocks.F22
        return jac

    return newton_solve(residual_fn, jacobian_fn, z, config)


@dataclass(frozen=True)
class Trace:
    """Time series of the full variable vector along a simulation."""

    times: np.ndarray
    states: np.ndarray
    labels: tuple

    def __post_init__(self):
        if self.states.shape != (len(self.times), len(self.labels)):
            raise ValueError("trace shape mismatch")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trace times must be strictly increasing")

    def column(self, label):
        return self.states[:, self.labels.index(label)]

    def to_csv(self, target):
        """Write `t,<label>,...` rows with 17 significant digits."""
        if isinstance(target, (str, Path)):
            with open(target, "w", encoding="utf-8") as handle:
                self.to_csv(handle)
            return
        target.write("t," + ",".join(self.labels) + "\n")
        for t, row in zip(self.times, self.states):
            values = ",".join(f"{x:.17g}" for x in row)
            target.write(f"{t:.17g},{values}\n")


def simulate(dae, x0=None, t0=0.0, t_stop=1.0, config=None):
    """Uniform-step backward-Euler trajectory from a consistent start."""
    config = config or SolverConfig()
    if t_stop <= t0:
        raise ValueError("t_stop must exceed t0")
    n_steps = max(1, int(round((t_stop - t0) / config.h)))
    z = consistent_init(dae, x0, t0, config)
    states = np.empty((n_steps + 1, dae.layout.n_total))
    times = t0 + config.h * np.arange(n_steps + 1)
    states[0] = z
    for k in range(1, n_steps + 1):
        t_prev = t0 + config.h * (k - 1)
        try:
            z = step_backward_euler(dae, z, t_prev, config.h, config)
        except NewtonError as err:
            raise SimulationError(
                f"time step to t={t0 + config.h * k:g} failed: {err}"
            ) from err
        states[k] = z
    return Trace(times=times, states=states, labels=dae.layout.labels)
