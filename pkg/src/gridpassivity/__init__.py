"""Decentralized passivity certification for AC power networks."""
from .bus_models import (AffineBusModel, ControllerParams, ExciterParams, GeneratorParams,
                         GovernorParams, PssParams, assemble_bus_model)
from .case_io import CaseFile, RunConfig, emit_case, load_shipped_case, parse_case
from .equilibrium import solve_case_equilibrium, solve_power_flow
from .linear_analysis import (FrequencyGrid, damping_ratio, full_system_eigenanalysis,
                              linearize_bus, linearize_equilibrium, passivity_sweep)
from .network import assemble_block, build_admittance, certify_network_passivity
from .simulator import LoadStep, Scenario, build_system, simulate

__version__ = "0.1.0"
