"""Decoherence of hierarchically encoded spin registers in a bosonic bath."""

from .encoding import (
    BitString,
    DecoherenceMatrix,
    RegisterSpec,
    crossover_time,
    decoherence_coefficient,
    decoherence_matrix,
    effective_k,
    k1_asymptote,
    plateau,
)
from .fidelity import (
    FidelityEstimate,
    McConfig,
    Method,
    fidelity_encoded_asymptote,
    fidelity_exact_sum,
    fidelity_independent,
    fidelity_mc,
    fidelity_small_deviation,
    fidelity_symmetric,
    fidelity_weak_coupling,
)
from .kernel import (
    BathSpec,
    ConvergenceError,
    Regime,
    dilog,
    k_dispatch,
    k_finite_exact,
    k_finite_limit,
    k_high_temperature,
    k_quadrature,
    k_rate,
    k_zero_exact,
    log_abs_gamma_ratio,
)
from .redfield import (
    Model,
    SpinPairSpec,
    TwoSpinState,
    asymptotic_rate,
    bose_occupation,
    correlator_pm,
    evolve,
    rate_from_trajectory,
    redfield_rhs_dissipative,
    subspace_fidelity,
)

__version__ = "0.1.0"
