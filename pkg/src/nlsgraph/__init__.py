"""Ground states of the NLS energy on noncompact metric graphs."""

from .closed_forms import (SolitonModel, TailFit, fit_tail, gagliardo_nirenberg_constant, soliton_constants,
                           soliton_energy_halfline, soliton_energy_line, soliton_value)
from .function_space import DiscreteFunction, EnergyReport, GridSpec, Mesh, evaluate, mass_project, rescale
from .graph_model import (CompactCore, GraphError, MetricGraph, build_graph, compact_core, dilate, gallery,
                          load_graph, satisfies_H)
from .minimize import MinimizeConfig, MinimizeResult, Seed, Status, verify_structure
from .phase_scan import Decision, broom_nonexistence, decide_existence, pendant_certificate, scan_threshold
from .rearrange import (Family, build_competitor, decreasing_rearrangement, stretch_surgery,
                        symmetric_rearrangement)

__all__ = [
    "CompactCore", "Decision", "DiscreteFunction", "EnergyReport", "Family", "GraphError", "GridSpec", "Mesh",
    "MetricGraph", "MinimizeConfig", "MinimizeResult", "Seed", "SolitonModel", "Status", "TailFit",
    "broom_nonexistence", "build_competitor", "build_graph", "compact_core", "decide_existence",
    "decreasing_rearrangement", "dilate", "evaluate", "fit_tail", "gagliardo_nirenberg_constant", "gallery",
    "load_graph", "mass_project", "pendant_certificate", "rescale", "satisfies_H", "scan_threshold",
    "soliton_constants", "soliton_energy_halfline", "soliton_energy_line", "soliton_value", "stretch_surgery",
    "symmetric_rearrangement", "verify_structure",
]
