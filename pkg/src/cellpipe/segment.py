"""Seeded watershed post-processing of cell/neighbor distance predictions."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from skimage.segmentation import watershed

from .core_image import connected_components, gaussian_smooth, relabel_sequential
from .labelgen import RepresentationPair

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentationConfig:
    rho_mask: float = 0.09
    rho_seed: float = 0.5
    sigma: tuple[float, ...] = (1.5, 1.5)
    neighbor_power: float = 2.0
    min_seed_area: int = 3
    connectivity: str = "face"
    split_enabled: bool = False
    split_factor: float = 4.0 / 3.0
    split_rho_step: float = 0.05
    split_rho_cap: float = 0.95
    split_max_iter: int = 12

    def __post_init__(self):
        if not 0 < self.rho_mask < 1:
            raise ValueError(f"rho_mask must lie in (0, 1), got {self.rho_mask}")
        if not 0 < self.rho_seed < 1:
            raise ValueError(f"rho_seed must lie in (0, 1), got {self.rho_seed}")
        if self.min_seed_area < 1:
            raise ValueError("min_seed_area must be >= 1")
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma must be non-negative")
        if self.split_rho_step <= 0:
            raise ValueError("split_rho_step must be positive")

    def sigma_for(self, ndim: int) -> tuple[float, ...]:
        if len(self.sigma) == ndim:
            return tuple(self.sigma)
        if ndim == 3 and len(self.sigma) == 2:
            # 3D default keeps the in-plane sigma and smooths little along z
            return (0.5, *self.sigma)
        raise ValueError(f"sigma {self.sigma} does not match a {ndim}D image")


def _smooth(pred: np.ndarray, cfg: SegmentationConfig) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    return gaussian_smooth(pred, cfg.sigma_for(pred.ndim))


def seed_score(cell_smoothed: np.ndarray, neighbor_smoothed: np.ndarray, power: float) -> np.ndarray:
    return cell_smoothed - np.clip(neighbor_smoothed, 0.0, None) ** power


def remove_small(labels: np.ndarray, min_area: int) -> np.ndarray:
    if min_area <= 1 or not labels.any():
        return labels
    sizes = np.bincount(labels.ravel())
    small = sizes < min_area
    small[0] = False
    out = labels.copy()
    out[small[labels]] = 0
    return relabel_sequential(out)


def extract_mask(cell_pred: np.ndarray, cfg: SegmentationConfig) -> np.ndarray:
    return _smooth(cell_pred, cfg) > cfg.rho_mask


def _seeds_from_score(score: np.ndarray, rho: float, cfg: SegmentationConfig, within=None) -> np.ndarray:
    candidate = score > rho
    if within is not None:
        candidate &= within
    return remove_small(connected_components(candidate, cfg.connectivity), cfg.min_seed_area)


def extract_seeds(cell_pred: np.ndarray, neighbor_pred: np.ndarray, cfg: SegmentationConfig) -> np.ndarray:
    if np.shape(cell_pred) != np.shape(neighbor_pred):
        raise ValueError("cell and neighbor predictions differ in shape")
    score = seed_score(_smooth(cell_pred, cfg), _smooth(neighbor_pred, cfg), cfg.neighbor_power)
    return _seeds_from_score(score, cfg.rho_seed, cfg)


def watershed_assign(mask: np.ndarray, seeds: np.ndarray, cell_smoothed: np.ndarray,
                     connectivity: str = "face") -> np.ndarray:
    """Flood the mask from the seeds, highest cell distance first.

    Every mask pixel connected to a seed receives exactly one seed label;
    mask regions without a seed stay background. Seed pixels outside the mask
    are dropped (with a warning).
    """
    mask = np.asarray(mask, dtype=bool)
    seeds = np.asarray(seeds)
    outside = (seeds != 0) & ~mask
    if outside.any():
        log.warning("%d seed pixels lie outside the mask and were clipped", int(outside.sum()))
        seeds = np.where(mask, seeds, 0)
    if not seeds.any():
        log.info("no seeds: returning an empty segmentation")
        return np.zeros(mask.shape, dtype=np.int32)
    conn = 1 if connectivity == "face" else mask.ndim
    out = watershed(-np.asarray(cell_smoothed, dtype=np.float64), markers=seeds.astype(np.int32),
                    mask=mask, connectivity=conn)
    return out.astype(np.int32)


def split_merged(labels: np.ndarray, preds: RepresentationPair, cfg: SegmentationConfig) -> np.ndarray:
    """Split objects much larger than the mean by raising the seed threshold locally."""
    labels = np.asarray(labels)
    ids, sizes = np.unique(labels[labels != 0], return_counts=True)
    if len(ids) == 0:
        return labels.copy()
    limit = cfg.split_factor * sizes.mean()
    big = ids[sizes > limit]
    if len(big) == 0:
        return labels.copy()

    cell_s = _smooth(preds.cell, cfg)
    score = seed_score(cell_s, _smooth(preds.neighbor, cfg), cfg.neighbor_power)
    out = labels.astype(np.int32, copy=True)
    next_id = int(out.max()) + 1
    slices = ndi.find_objects(out)
    for obj in big:
        sl = slices[obj - 1]
        region = out[sl] == obj
        rho = cfg.rho_seed
        for _ in range(cfg.split_max_iter):
            rho = min(rho + cfg.split_rho_step, cfg.split_rho_cap)
            seeds = _seeds_from_score(score[sl], rho, cfg, within=region)
            if seeds.max() >= 2:
                parts = watershed_assign(region, seeds, cell_s[sl], cfg.connectivity)
                view = out[sl]
                view[region] = 0
                for part in range(1, int(parts.max()) + 1):
                    # first part keeps the original ID
                    view[parts == part] = obj if part == 1 else next_id
                    if part > 1:
                        next_id += 1
                log.debug("split object %d into %d parts at rho_seed=%.2f", obj, parts.max(), rho)
                break
            if rho >= cfg.split_rho_cap:
                break
    return relabel_sequential(out)


def segment_frame(preds: RepresentationPair, cfg: SegmentationConfig | None = None) -> np.ndarray:
    cfg = cfg or SegmentationConfig()
    cell_s = _smooth(preds.cell, cfg)
    mask = cell_s > cfg.rho_mask
    seeds = extract_seeds(preds.cell, preds.neighbor, cfg)
    labels = watershed_assign(mask, seeds, cell_s, cfg.connectivity)
    if cfg.split_enabled:
        labels = split_merged(labels, preds, cfg)
    return relabel_sequential(labels)
