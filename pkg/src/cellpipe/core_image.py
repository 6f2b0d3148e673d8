"""Low-level grid operators shared by label generation, segmentation and tracking.

All images are plain numpy arrays with axis order ``(z,) y, x``. Label images
are non-negative integer arrays where 0 marks background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi


def _check_ndim(arr: np.ndarray) -> None:
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a 2D or 3D grid, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"grid extents must be >= 1, got {arr.shape}")


def squared_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance of each foreground element to background.

    Returned as int64 so the result can be compared bit-exactly. Background
    elements are 0. If the mask has no background at all, every element is set
    to the squared image diagonal.
    """
    mask = np.asarray(mask).astype(bool)
    _check_ndim(mask)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.int64)
    if mask.all():
        diag2 = sum(int(s) ** 2 for s in mask.shape)
        return np.full(mask.shape, diag2, dtype=np.int64)
    # scipy's nearest-background indices are exact; the distances are
    # recomputed from them in integer arithmetic.
    nearest = ndi.distance_transform_edt(mask, return_distances=False, return_indices=True)
    coords = np.indices(mask.shape, dtype=np.int64)
    return ((nearest.astype(np.int64) - coords) ** 2).sum(axis=0)


def euclidean_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance to the nearest background element.

    An all-foreground mask has no background to measure against; its
    distances are clamped to the image diagonal length.
    """
    return np.sqrt(squared_distance_transform(mask).astype(np.float64))


def gaussian_smooth(grid: np.ndarray, sigma) -> np.ndarray:
    """Separable Gaussian smoothing with edge replication at the borders.

    ``sigma`` is a scalar or one standard deviation per axis; a zero entry
    leaves that axis untouched.
    """
    grid = np.asarray(grid, dtype=np.float64)
    _check_ndim(grid)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (grid.ndim,))
    if (sigma < 0).any():
        raise ValueError(f"sigma must be non-negative, got {tuple(sigma)}")
    if not sigma.any():
        return grid.copy()
    return ndi.gaussian_filter(grid, sigma=tuple(sigma), mode="nearest", truncate=4.0)


def ball(radius: int, ndim: int) -> np.ndarray:
    """Discrete disk (2D) or ball (3D) footprint: offsets with norm <= radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ax = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([ax] * ndim), indexing="ij")
    return sum(g.astype(np.int64) ** 2 for g in grids) <= radius * radius


def grayscale_closing(grid: np.ndarray, radius: int) -> np.ndarray:
    """Grayscale dilation followed by erosion with a disk/ball footprint."""
    grid = np.asarray(grid, dtype=np.float64)
    _check_ndim(grid)
    if radius < 0:
        raise ValueError("closing radius must be >= 0")
    if radius == 0:
        return grid.copy()
    return ndi.grey_closing(grid, footprint=ball(radius, grid.ndim))


def connectivity_structure(ndim: int, connectivity: str = "face") -> np.ndarray:
    if connectivity == "face":
        return ndi.generate_binary_structure(ndim, 1)
    if connectivity == "full":
        return ndi.generate_binary_structure(ndim, ndim)
    raise ValueError(f"connectivity must be 'face' or 'full', got {connectivity!r}")


def connected_components(mask: np.ndarray, connectivity: str = "face") -> np.ndarray:
    """Label connected foreground regions 1..n in raster order of their first element."""
    mask = np.asarray(mask).astype(bool)
    _check_ndim(mask)
    labels, _ = ndi.label(mask, structure=connectivity_structure(mask.ndim, connectivity))
    return labels.astype(np.int32)


def relabel_sequential(labels: np.ndarray) -> np.ndarray:
    """Map nonzero IDs to 1..n ordered by their first element in raster order."""
    labels = np.asarray(labels)
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    order = ids[np.argsort(first, kind="stable")]
    lut = np.zeros(int(flat.max(initial=0)) + 1, dtype=np.int32)
    lut[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    return lut[labels]


@dataclass(frozen=True)
class ObjectStats:
    id: int
    size: int
    centroid: tuple[float, ...]
    median_position: tuple[int, ...]
    bbox: tuple[tuple[int, int], ...]  # per axis (start, stop), stop exclusive

    @property
    def ndim(self) -> int:
        return len(self.centroid)


def _lower_median(values: np.ndarray) -> int:
    s = np.sort(values)
    return int(s[(len(s) - 1) // 2])


def object_stats(labels: np.ndarray) -> list[ObjectStats]:
    """One record per nonzero ID, sorted by ID."""
    labels = np.asarray(labels)
    _check_ndim(labels)
    stats = []
    slices = ndi.find_objects(labels.astype(np.int64))
    for i, sl in enumerate(slices, start=1):
        if sl is None:
            continue
        local = np.nonzero(labels[sl] == i)
        coords = [c + s.start for c, s in zip(local, sl)]
        stats.append(
            ObjectStats(
                id=i,
                size=len(coords[0]),
                centroid=tuple(float(c.mean()) for c in coords),
                median_position=tuple(_lower_median(c) for c in coords),
                bbox=tuple((s.start, s.stop) for s in sl),
            )
        )
    return stats
