"""Phase-correlation movement estimation and per-track search windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-12
MIN_CROP = 8


def estimate_shift(crop_t: np.ndarray, crop_t1: np.ndarray) -> tuple[int, ...]:
    """Integer displacement ``d`` such that ``crop_t1`` is roughly ``crop_t`` moved by ``d``.

    The peak of the inverse normalized cross-power spectrum is mapped to the
    signed range (-N/2, N/2] per axis. Ties between equal peaks resolve to the
    first one in raster order.
    """
    a = np.asarray(crop_t, dtype=np.float64)
    b = np.asarray(crop_t1, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"crop shapes differ: {a.shape} vs {b.shape}")
    fa = np.fft.fftn(a)
    fb = np.fft.fftn(b)
    cross = fb * np.conj(fa)
    corr = np.fft.ifftn(cross / (np.abs(cross) + EPS)).real
    peak = np.unravel_index(int(np.argmax(corr)), corr.shape)
    return tuple(int(p - n) if p > n // 2 else int(p) for p, n in zip(peak, corr.shape))


@dataclass
class ROI:
    """Axis-aligned search window given by its center and extents (pixels)."""

    center: np.ndarray
    extent: tuple[int, ...]

    def bounds(self, image_shape: tuple[int, ...]) -> tuple[slice, ...]:
        """Window slices clipped to the image (the window shrinks when larger than the image)."""
        out = []
        for c, e, n in zip(self.center, self.extent, image_shape):
            e = min(int(e), n)
            start = int(np.floor(c - e / 2.0 + 0.5))
            start = min(max(start, 0), n - e)
            out.append(slice(start, start + e))
        return tuple(out)

    def contains(self, point, image_shape: tuple[int, ...]) -> bool:
        return all(s.start <= p < s.stop for p, s in zip(point, self.bounds(image_shape)))

    def largest_edge(self) -> int:
        return int(max(self.extent))


def clamp_center(center, extent, image_shape) -> np.ndarray:
    """Move a center so the full window lies inside the image where possible."""
    out = []
    for c, e, n in zip(center, extent, image_shape):
        half = min(e, n) / 2.0
        out.append(min(max(float(c), half - 0.5), n - half - 0.5))
    return np.asarray(out, dtype=np.float64)


def update_roi(roi: ROI, shift, image_shape) -> ROI:
    moved = np.asarray(roi.center, dtype=np.float64) + np.asarray(shift, dtype=np.float64)
    return ROI(center=clamp_center(moved, roi.extent, image_shape), extent=roi.extent)


def roi_shift(roi: ROI, frame_t: np.ndarray | None, frame_t1: np.ndarray | None) -> tuple[int, ...]:
    """Shift of the track's window content between two raw frames; zero without raw data."""
    ndim = len(roi.extent)
    if frame_t is None or frame_t1 is None:
        return (0,) * ndim
    sl = roi.bounds(frame_t.shape)
    if any(s.stop - s.start < MIN_CROP for s in sl):
        return (0,) * ndim
    return estimate_shift(frame_t[sl], frame_t1[sl])
