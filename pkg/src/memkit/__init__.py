"""memkit: nodal DAE analysis and simulation of first-order memristive
circuits.

Pipeline: parse a netlist into a circuit, classify its devices, detect
topologically degenerate configurations, assemble the semiexplicit nodal
model, determine its tractability index, and integrate it with backward
Euler.
"""

from .devices import (Characteristic, Classification, DeviceClass,
                      DeviceSpec, SourceWaveform, chua_parallel_hybrid,
                      chua_phi_memristor, chua_q_memristor,
                      chua_series_hybrid, classify, eval_characteristic,
                      incremental_matrix, josephson_memcapacitor)
from .expr import Expr, parse_expr
from .index import (ChainResult, IndexReport, Pencil, analyze, dae_pencil,
                    index_one_test, is_nonsingular, kronecker_oracle,
                    nullspace_projector, pencil_state_dimension,
                    schur_reduced_matrix, tractability_chain)
from .netlist import (Branch, Circuit, IncidenceMatrix, build_circuit,
                      format_netlist, parse_netlist, reduced_incidence)
from .nodal import SemiExplicitDAE, VariableLayout, assemble
from .sim import (SolverConfig, Trace, consistent_init, newton_solve,
                  simulate, step_backward_euler)
from .topology import (DegeneracyReport, check_wellposed, degeneracy_report,
                       ilm_cutset_exists, vcm_loop_exists)

__version__ = "0.1.0"

__all__ = [
    "Characteristic", "Classification", "DeviceClass", "DeviceSpec",
    "SourceWaveform", "chua_parallel_hybrid", "chua_phi_memristor",
    "chua_q_memristor", "chua_series_hybrid", "classify",
    "eval_characteristic", "incremental_matrix", "josephson_memcapacitor",
    "Expr", "parse_expr",
    "ChainResult", "IndexReport", "Pencil", "analyze", "dae_pencil",
    "index_one_test", "is_nonsingular", "kronecker_oracle",
    "nullspace_projector", "pencil_state_dimension",
    "schur_reduced_matrix", "tractability_chain",
    "Branch", "Circuit", "IncidenceMatrix", "build_circuit",
    "format_netlist", "parse_netlist", "reduced_incidence",
    "SemiExplicitDAE", "VariableLayout", "assemble",
    "SolverConfig", "Trace", "consistent_init", "newton_solve",
    "simulate", "step_backward_euler",
    "DegeneracyReport", "check_wellposed", "degeneracy_report",
    "ilm_cutset_exists", "vcm_loop_exists",
    "__version__",
]
