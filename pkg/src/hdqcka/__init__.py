"""Simulator and finite-key calculator for high-dimensional quantum
conference key agreement with qudit GHZ states."""

from .core_math import (
    QuditWord,
    binary_entropy,
    d_ary_entropy,
    d_ary_entropy_bits,
    hamming_ball_volume_bound,
    hamming_ball_volume_exact,
    relative_hamming_weight,
    round_sums,
)
from .finite_key import (
    KeyRateReport,
    ParamsTemplate,
    ProtocolParams,
    asymptotic_rate,
    evaluate,
    evaluate_observed,
    key_length,
    key_rate,
    leak_ec_bound,
    nu_correction,
    security_epsilons,
    sweep,
)
from .protocol import TranscriptRecord, run_protocol

__version__ = "0.1.0"
