"""Shared fixtures: the netlist corpus and numeric oracles."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from memkit import assemble, parse_netlist

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# Well-posed, topologically nondegenerate, positive incremental matrices;
# together these cover every first-order device class at least once.
NONDEGENERATE = (
    "vrc_series", "gc_parallel", "gc_decay", "vrl_series", "igl_parallel",
    "mq_drive", "mw_drive", "mc_drive", "ml_drive", "hm_drive", "hw_drive",
    "rgc_ladder", "bridge_mixed", "full_zoo",
)

# Well-posed but degenerate: each must come out tractability index two.
DEGENERATE = ("vc_loop", "c_mc_loop", "cc_loop", "il_cutset", "iml_cutset",
              "lml_cutset")

ILL_POSED = ("vv_loop", "i_cutset")

EQUIVALENCE = ("josephson_fig2a", "josephson_fig2b", "chua_series_pair",
               "chua_series_hyb", "chua_parallel_pair", "chua_parallel_hyb")

ALL_WELL_POSED = NONDEGENERATE + DEGENERATE + EQUIVALENCE


def fixture_path(name):
    return FIXTURE_DIR / f"{name}.ckt"


def load_circuit(name):
    return parse_netlist(fixture_path(name).read_text())


@lru_cache(maxsize=None)
def load_dae(name):
    return assemble(load_circuit(name))


def fd_jacobian(dae, z, t=0.0):
    """Central finite differences of the residual: the Jacobian oracle."""
    z = np.asarray(z, dtype=float)
    n = z.size
    jac = np.empty((n, n))
    for k in range(n):
        step = 1e-6 * max(1.0, abs(z[k]))
        zp, zm = z.copy(), z.copy()
        zp[k] += step
        zm[k] -= step
        jac[:, k] = (dae.residual(zp, t) - dae.residual(zm, t)) / (2 * step)
    return jac


def random_state(dae, rng, scale=1.0):
    return scale * rng.uniform(-1.0, 1.0, size=dae.layout.n_total)


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
