"""Behavioral study of an analog 8-PAM soft demapper over AWGN.

Digital exact and max-log reference demappers, a cell-level behavioral
model of the analog implementation with automatic synthesis from the
max-log piecewise-linear targets, affine calibration, information-rate
and BER evaluation, and a settling-time model for symbol-rate sweeps.
"""

__version__ = "0.1.0"

from .analog import (
    AnalogDemapper,
    CellSpec,
    PwlFunction,
    build_demapper,
    cell_output_v,
    demap_static,
    load_demapper,
    maxlog_pwl_voltage,
    save_demapper,
    synthesize_cells,
)
from .calibration import AffineMap, calibration_grid, fit_output_map, input_map
from .channel import ChannelParams, from_snr_db, transmit, worker_rng
from .constellation import Constellation, IndexSet, build_pam8, index_set, map_bits
from .dynamics import (
    DynamicsParams,
    TransientTrace,
    ber_vs_rate,
    detect_saturation_exit,
    simulate_transient,
)
from .metrics import (
    BerEstimate,
    GmiEstimate,
    energy_per_bit,
    evaluate_demappers,
    gmi,
    hard_decide,
    mi_bitwise,
    rate_penalty,
)
from .reference import exact_llr, maxlog_llr

__all__ = [
    "AffineMap",
    "AnalogDemapper",
    "BerEstimate",
    "CellSpec",
    "ChannelParams",
    "Constellation",
    "DynamicsParams",
    "GmiEstimate",
    "IndexSet",
    "PwlFunction",
    "TransientTrace",
    "ber_vs_rate",
    "build_demapper",
    "build_pam8",
    "calibration_grid",
    "cell_output_v",
    "demap_static",
    "detect_saturation_exit",
    "energy_per_bit",
    "evaluate_demappers",
    "exact_llr",
    "fit_output_map",
    "from_snr_db",
    "gmi",
    "hard_decide",
    "index_set",
    "input_map",
    "load_demapper",
    "map_bits",
    "maxlog_llr",
    "maxlog_pwl_voltage",
    "mi_bitwise",
    "rate_penalty",
    "save_demapper",
    "simulate_transient",
    "synthesize_cells",
    "transmit",
    "worker_rng",
]
