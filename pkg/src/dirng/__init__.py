"""Bell-test randomness expansion: certified rates, protocol simulation,
and Toeplitz extraction."""

__version__ = "0.1.0"

from .bell import (BellExpression, Behavior, CANONICAL_ANGLES, CHSH,
                   QuantumModel, WEIGHTED, behavior_from_model, bell_value,
                   classical_bound, correlator, expression_from_json,
                   optimize_angles, visibility_for_target)
from .curves import (EntropyCurve, MinTradeoff, analytic_chsh_minentropy,
                     analytic_chsh_vne, builtin_curve_names, load_curve)
from .eat import (AccountingLedger, EatCertificate, InfeasibleParameters,
                  ProtocolParams, RateReport, asymptotic_rate, bell_tolerance,
                  binary_entropy, consumption_per_round, eat_certified_bits,
                  net_rate, optimize, params_from_profile, rounds_in_time,
                  switch_probability)
from .extract import (ToeplitzSeed, extract, extract_dense, output_length,
                      pack_bits, unpack_bits)
from .simulate import (SimulationResult, estimate_abort_rate, run_protocol,
                       run_protocol_for_params)

__all__ = [name for name in dir() if not name.startswith("_")]
