from .matching import (
    MatchGraph,
    MatchResult,
    TrackInput,
    build_graph,
    matching_cost,
    result_flows,
    solve_matching,
    split_condition,
    split_cost,
)
from .motion import ROI, estimate_shift, update_roi
from .tracker import (
    Track,
    Tracker,
    TrackingConfig,
    TrackingResult,
    init_tracks,
    postprocess_lineage,
    track_sequence,
)
