"""Data-driven control from input-state data with polyhedral cross-covariance noise bounds.

The pipeline: trajectory data plus entrywise bounds on the sample
cross-covariance between the process noise and user-chosen instrumental
signals define a polyhedral set of systems consistent with the data.
When that set is bounded, its vertices feed finite LMI families that
decide informativity and synthesize state-feedback gains for
stabilization and H2/Hinf performance; independent analysis oracles
re-verify every certificate.
"""

from polycov.data import (
    CrossCovBounds,
    CrossCovSummary,
    InstrumentSet,
    NoiseBoundReport,
    SystemPair,
    TrajectoryData,
    build_lagged_instruments,
    check_noise_bounds,
    cross_cov_summary,
    load_bounds,
    load_instrument_spec,
    load_trajectory,
    simulate,
)
from polycov.feasible import (
    BOUNDED,
    UNBOUNDED,
    UNDETERMINED,
    FeasibleSet,
    RowPolyhedron,
    build_feasible_set,
    contains,
    is_empty,
)
from polycov.polytope import (
    VertexSet,
    enumerate_row_vertices,
    enumerate_vertices,
    product_vertices,
    recession_directions,
    remove_redundant,
)
from polycov.lmi import (
    DecisionVar,
    FeasibilityResult,
    LmiBlock,
    LmiProblem,
    evaluate_blocks,
    solve_feasibility,
)
from polycov.synthesis import (
    PerformanceSpec,
    SynthesisResult,
    stabilize_quadratic,
    stabilize_scalar_unbounded,
    stabilize_scalar_unbounded_lmi,
    synth_h2,
    synth_hinf,
)
from polycov.analysis import (
    ClosedLoop,
    check_inclusion,
    h2_norm,
    hinf_norm,
    spectral_radius,
    verify_quadratic,
)

__version__ = "0.1.0"
