"""Sequential (causal) rate-distortion toolkit.

Computes causal rate-distortion values for partially observed Gauss-Markov
sources, designs the matched scalar-AWGN encoder/decoder/filter realization,
simulates the closed loop, and validates the optimal-kernel theory on small
finite alphabets.
"""

from .discrete import (
    CausalKernelFamily,
    FiniteSource,
    NrdfSolution,
    directed_information,
    iid_source,
    marginal_update,
    optimal_kernel_update,
    solve_nrdf,
)
from .errors import (
    DivergenceError,
    DomainError,
    InfeasibleRealizationError,
    InstanceTooLargeError,
    NonconvergenceError,
    SeqrdError,
    StructuralError,
    UnsupportedModeCountError,
)
from .realization import (
    ChannelModel,
    FixedPointConfig,
    KalmanState,
    RealizationDesign,
    analytic_distortion,
    capacity_matched_power,
    decode,
    design_steady_state,
    encode,
    riccati_step,
    solve_alpha,
)
from .harness import SimReport, run_chain, sweep
from .sources import (
    StateSpaceModel,
    Trajectory,
    load_model,
    save_model,
    scalar_model,
    simulate,
    stationary_state_cov,
    validate_model,
)
from .waterfill import (
    InnovationDecomposition,
    WaterFillAllocation,
    diagonalize,
    innovation_covariance,
    rate_na,
    rdf_curve,
    reverse_waterfill,
)

__version__ = "0.1.0"
