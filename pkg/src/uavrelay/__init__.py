"""Multi-UAV decode-and-forward relaying simulator for massive-MIMO downlinks.

Submodules mirror the processing chain: geometry and channel synthesis,
UAV-user clustering, hybrid beamformer construction, rate metrics, swarm
optimization of placement and power, and the Monte Carlo harness behind the
``uavrelay`` command line tool.
"""

from .geometry import (
    AngleSupport,
    ArrayGeometry,
    DegenerateGeometryError,
    NetworkLayout,
    Position3D,
    angles_between,
    distance_3d,
)
from .channel import (
    ArraySet,
    ChannelParams,
    ChannelSet,
    dbm_to_watts,
    noise_power_dbm,
    noise_power_watts,
    steering_vector,
    synthesize_channel_set,
    synthesize_h1,
    synthesize_user_channel,
)
from .clustering import (
    Assignment,
    associate_nearest,
    balanced_association,
    kmeans_associate,
    rebalance_equal,
)
from .beamforming import (
    BbStage,
    DegeneratePowerError,
    EmptyRfSupportError,
    HybridBeamformers,
    PowerAllocation,
    RankDeficientZfError,
    RfStage,
    RfWindows,
    bb_bs,
    bb_uav_receive,
    bb_uav_transmit_rzf,
    build_beamformers,
    effective_h1,
    effective_h2_blocks,
    normalize_power,
    quantized_angle_grid,
    select_rf_columns,
)
from .rates import (
    NoiseModel,
    NumericalRateError,
    RateBreakdown,
    evaluate_rates,
    rate_first_hop,
    rate_second_hop,
    rate_total,
    sinr_user,
)
from .pso import (
    OptimizeResult,
    ParticleCodec,
    PipelineSettings,
    RateObjective,
    SwarmConfig,
    SwarmState,
    evaluate_candidate,
    init_swarm,
    optimize,
    step,
)

__version__ = "0.1.0"
