"""Cell segmentation from distance predictions and graph-based cell tracking."""

from .core_image import (
    ObjectStats,
    connected_components,
    euclidean_distance_transform,
    gaussian_smooth,
    grayscale_closing,
    object_stats,
    squared_distance_transform,
)
from .labelgen import (
    LabelGenConfig,
    RepresentationPair,
    boundary_and_border_labels,
    cell_distance,
    make_representation_pair,
    neighbor_distance,
)
from .segment import SegmentationConfig, segment_frame

__version__ = "0.1.0"
