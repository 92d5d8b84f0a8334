"""Variable-modulation sparse code multiple access (SCMA) toolkit.

Mother constellations, variable modulation matrices, sparse codebook design
with distance-aware power allocation, MPA detection, analytic error and
capacity measures, adaptive mode selection and Monte Carlo campaigns.
"""

__version__ = "0.1.0"

from .analysis import (
    SerModel,
    aser_high_snr,
    aser_union_bound,
    ergodic_capacity,
    pep,
    statistical_snr,
)
from .avm import select_tm, tm_table
from .channel import Deployment, block_rng, draw_channel, transmit
from .codebook import CodebookSet, design_vm_scma
from .constellation import MotherConstellation, builtin_mc_pool, permute_mc
from .factor_graph import FactorGraph, default_graph_4x6, graph_6x9
from .montecarlo import SimConfig, run_cell_average, run_ser, run_throughput
from .mpa import MpaConfig, ml_decode, mpa_decode
from .vmm import optimize_vmm

__all__ = [
    "CodebookSet",
    "Deployment",
    "FactorGraph",
    "MotherConstellation",
    "MpaConfig",
    "SerModel",
    "SimConfig",
    "aser_high_snr",
    "aser_union_bound",
    "block_rng",
    "builtin_mc_pool",
    "default_graph_4x6",
    "design_vm_scma",
    "draw_channel",
    "ergodic_capacity",
    "graph_6x9",
    "ml_decode",
    "mpa_decode",
    "optimize_vmm",
    "pep",
    "permute_mc",
    "run_cell_average",
    "run_ser",
    "run_throughput",
    "select_tm",
    "statistical_snr",
    "tm_table",
    "transmit",
]
