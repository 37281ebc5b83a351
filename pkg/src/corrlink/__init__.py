"""Two-user spatially correlated interference networks with delayed channel knowledge."""

__version__ = "0.1.0"

from .correlation import (  # noqa: E402
    ChannelState,
    CorrelationParams,
    JointInfeasibleError,
    JointStatePmf,
    PairwiseJoint,
    ParameterError,
    build_joint_pmf,
    feasible_range,
    pairwise_joint,
    sample_state,
)
from .fieldla import EquationStore, FieldSpec, decodable, project_out_known, rank  # noqa: E402
from .protocol import SimConfig, SimReport, run_batch, simulate  # noqa: E402
from .region import (  # noqa: E402
    Region,
    beta,
    contains,
    export_boundary,
    max_symmetric_sum_rate,
    p_rx_00,
    region,
)
from .verifier import RankRatioEstimate, compare_to_region, estimate_rank_ratio, sweep  # noqa: E402
