"""Time-local quantum master equations and non-Markovianity witnesses.

The package simulates finite-dimensional dynamical maps from time-local
generators, extracts intermediate propagators and Choi matrices, evaluates
the full bank of non-Markovianity witnesses (trace-norm, information flow,
entropic, fidelity, skew-information, Heisenberg-picture) and aggregates them
into scalar measures with a step-divisibility verdict.
"""

__version__ = "0.1.0"

from .operators import (
    NotPSDError,
    fidelity,
    matrix_function,
    max_entangled_projector,
    operator_norm,
    relative_entropy,
    renyi_relative_entropy,
    skew_information,
    spectral_decomposition,
    trace_distance,
    trace_norm,
    tsallis_relative_entropy,
    von_neumann_entropy,
)
from .volterra import (
    AmplitudeSolution,
    ExponentialKernel,
    TabulatedKernel,
    solve_memory_kernel,
)
from .dynamics import (
    BlochZSineTarget,
    Constant,
    ConstantTarget,
    Dephasing,
    Lindblad,
    OffsetSine,
    Sine,
    SingularPropagatorError,
    SpinBoson,
    Table,
    TraceReplacement,
    Trajectory,
    apply_superop,
    averaged_target,
    choi_matrix,
    dual_superop,
    evolve,
    generator_superoperator,
    intermediate_map,
    load_trajectory,
    save_trajectory,
    unvec,
    vec,
)
from .witnesses import (
    DualOperatorNormWitness,
    ExtendedTraceNormWitness,
    FidelityPair,
    HeisenbergSkew,
    InformationFlowPair,
    InvarianceError,
    InvariantOverlap,
    PlainTraceNormWitness,
    RelativeEntropyPair,
    RenyiPair,
    SchrodingerSkew,
    TsallisPair,
    WitnessSeries,
    flow,
    qubit_entropy_flow,
    series,
    spectral_modes,
    verify_invariance,
)
from .measures import (
    BlpMeasureResult,
    SearchConfig,
    Verdict,
    WitnessMeasureResult,
    blp_measure,
    divisibility_verdict,
    rhp_measure,
    rhp_rate,
    witness_measure,
)
