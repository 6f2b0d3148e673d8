"""Distance-based training targets generated from instance label images.

Two maps are produced per label image: the cell distance (normalized distance
of each cell pixel to the nearest pixel outside that cell) and the neighbor
distance (inverted normalized distance to the closest other cell, closed and
power-scaled so it concentrates near cell contacts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core_image import (
    euclidean_distance_transform,
    grayscale_closing,
)


@dataclass(frozen=True)
class LabelGenConfig:
    closing_radius: int = 2
    exponent: int = 3

    def __post_init__(self):
        if self.closing_radius < 0:
            raise ValueError("closing_radius must be >= 0")
        if self.exponent < 1:
            raise ValueError("exponent must be >= 1")


@dataclass(frozen=True)
class RepresentationPair:
    cell: np.ndarray
    neighbor: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cell.shape

    def __post_init__(self):
        if self.cell.shape != self.neighbor.shape:
            raise ValueError(
                f"cell and neighbor maps differ in shape: {self.cell.shape} vs {self.neighbor.shape}"
            )


def _padded_slices(sl: tuple[slice, ...], shape: tuple[int, ...], pad: int = 1):
    return tuple(slice(max(s.start - pad, 0), min(s.stop + pad, n)) for s, n in zip(sl, shape))


def cell_distance(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros(labels.shape, dtype=np.float64)
    for i, sl in enumerate(ndi.find_objects(labels.astype(np.int64)), start=1):
        if sl is None:
            continue
        # one pixel of margin is enough: outside the cell everything is background
        sl = _padded_slices(sl, labels.shape)
        cell = labels[sl] == i
        dist = euclidean_distance_transform(cell)
        out[sl][cell] = dist[cell] / dist[cell].max()
    return out


def inverted_neighbor_distance(labels: np.ndarray) -> np.ndarray:
    """Per-cell inverted normalized distance to the nearest other cell, composed.

    A lone cell has nothing to measure against and stays at zero.
    """
    labels = np.asarray(labels)
    out = np.zeros(labels.shape, dtype=np.float64)
    ids = np.unique(labels)
    ids = ids[ids != 0]
    if len(ids) < 2:
        return out
    background = labels == 0
    for i in ids:
        cell = labels == i
        dist = euclidean_distance_transform(cell | background)[cell]
        out[cell] = 1.0 - dist / dist.max()
    return out


def neighbor_distance(labels: np.ndarray, closing_radius: int = 2, exponent: int = 3) -> np.ndarray:
    labels = np.asarray(labels)
    if closing_radius < 0:
        raise ValueError("closing_radius must be >= 0")
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    composed = inverted_neighbor_distance(labels)
    closed = grayscale_closing(composed, closing_radius)
    # closing may bleed into background gaps; targets stay zero outside cells
    closed[labels == 0] = 0.0
    return np.clip(closed, 0.0, 1.0) ** exponent


def make_representation_pair(labels: np.ndarray, cfg: LabelGenConfig | None = None) -> RepresentationPair:
    cfg = cfg or LabelGenConfig()
    return RepresentationPair(
        cell=cell_distance(labels),
        neighbor=neighbor_distance(labels, cfg.closing_radius, cfg.exponent),
    )


def boundary_and_border_labels(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Binary boundary and border maps (legacy representations).

    Boundary: cell pixels with a face neighbor carrying a different label
    (background included). Border: boundary pixels touching another cell.
    Pixels outside the image do not count as neighbors.
    """
    lab = np.asarray(labels).astype(np.int64)
    boundary = np.zeros(lab.shape, dtype=bool)
    border = np.zeros(lab.shape, dtype=bool)
    for axis in range(lab.ndim):
        for step in (1, -1):
            here = [slice(None)] * lab.ndim
            there = [slice(None)] * lab.ndim
            here[axis] = slice(0, -1) if step == 1 else slice(1, None)
            there[axis] = slice(1, None) if step == 1 else slice(0, -1)
            a, b = lab[tuple(here)], lab[tuple(there)]
            differs = (a != 0) & (a != b)
            boundary[tuple(here)] |= differs
            border[tuple(here)] |= differs & (b != 0)
    return boundary, border
