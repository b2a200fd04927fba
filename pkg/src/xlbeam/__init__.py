"""Near-field beam training for extremely large ULAs: channel model, codebooks,
training engines and a Monte Carlo harness."""

from .array_model import (
    INF,
    REFERENCE_ARRAY,
    ArrayConfig,
    Channel,
    MeasurementOracle,
    UserLocation,
    beam_gain,
    element_distance,
    element_offset,
    far_steering,
    make_channel,
    near_steering,
)
from .codebook import (
    Codeword,
    DistanceIndexSet,
    PolarCodebook,
    angular_codebook,
    default_s_delta,
    distance_index,
    last_layer_candidates,
    lower_codeword,
    polar_codebook,
    upper_codeword,
)
from .training import (
    EngineParams,
    TrainingResult,
    choose_L,
    optimal_polar_index,
    overhead,
    run_engine,
    run_exhaustive,
    run_far_exhaustive,
    run_far_hierarchical,
    run_two_phase,
    run_two_stage,
)

__version__ = "0.1.0"
