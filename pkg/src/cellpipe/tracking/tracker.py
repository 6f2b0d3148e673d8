"""Frame-by-frame tracking with gap re-linking, division handling and lineage clean-up."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core_image import ObjectStats, object_stats
from .matching import TrackInput, build_graph, solve_matching
from .motion import ROI, clamp_center, roi_shift, update_roi

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackingConfig:
    delta_t: int = 3
    alpha: float = 0.5
    beta: float = 1.2
    gamma_factor: float = 2.0
    roi_extent: tuple[int, ...] = (150, 150)
    rho_multiplier: float = 10.0
    track_all: bool = True

    def __post_init__(self):
        if self.delta_t < 0:
            raise ValueError("delta_t must be >= 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if any(e <= 0 for e in self.roi_extent):
            raise ValueError("roi_extent must be positive")

    def roi_for(self, ndim: int) -> tuple[int, ...]:
        if len(self.roi_extent) == ndim:
            return tuple(int(e) for e in self.roi_extent)
        if len(self.roi_extent) == 1:
            return (int(self.roi_extent[0]),) * ndim
        if ndim == 3 and len(self.roi_extent) == 2:
            return (100, 100, 100)
        raise ValueError(f"roi_extent {self.roi_extent} does not match a {ndim}D image")


@dataclass
class Track:
    id: int
    parent_id: int
    roi: ROI
    # time -> stats of the assigned object (IDs refer to the input label frame)
    assignments: dict[int, ObjectStats] = field(default_factory=dict)
    # time -> coordinate arrays of masks added during post-processing
    added_masks: dict[int, tuple[np.ndarray, ...]] = field(default_factory=dict)
    pending_shift: np.ndarray | None = None
    closed: bool = False  # has successors

    @property
    def last_time(self) -> int:
        return max(self.assignments)

    @property
    def first_time(self) -> int:
        return min(self.assignments)

    @property
    def last(self) -> ObjectStats:
        return self.assignments[self.last_time]

    def span(self) -> tuple[int, int]:
        """First and last frame, counting masks added during post-processing."""
        times = set(self.assignments) | set(self.added_masks)
        return min(times), max(times)

    def is_active(self, t: int, delta_t: int) -> bool:
        return not self.closed and t - self.last_time <= delta_t

    def predicted_position(self) -> np.ndarray:
        return np.asarray(self.last.centroid) + self.pending_shift

    def assign(self, t: int, stats: ObjectStats, image_shape) -> None:
        self.assignments[t] = stats
        self.pending_shift = np.zeros(len(stats.centroid))
        self.roi = ROI(clamp_center(stats.median_position, self.roi.extent, image_shape), self.roi.extent)


def new_track(track_id: int, t: int, stats: ObjectStats, cfg: TrackingConfig, image_shape,
              parent_id: int = 0) -> Track:
    extent = cfg.roi_for(len(image_shape))
    track = Track(track_id, parent_id, ROI(np.zeros(len(extent)), extent))
    track.assign(t, stats, image_shape)
    return track


def init_tracks(first_labels: np.ndarray, cfg: TrackingConfig, marked=None, t0: int = 0) -> list[Track]:
    stats = object_stats(first_labels)
    if marked is not None:
        present = {s.id for s in stats}
        missing = sorted(set(marked) - present)
        if missing:
            raise ValueError(f"marked object(s) {missing} not present in the first frame")
        stats = [s for s in stats if s.id in set(marked)]
    return [new_track(i, t0, s, cfg, first_labels.shape) for i, s in enumerate(stats, start=1)]


class Tracker:
    """Owns the sequence state; call :meth:`step` for t = 0 .. T-2 in order."""

    def __init__(self, label_frames, raw_frames=None, cfg: TrackingConfig | None = None, marked=None):
        self.labels = label_frames
        self.raw = raw_frames
        self.cfg = cfg or TrackingConfig()
        self.shape = tuple(np.shape(label_frames[0]))
        self.ndim = len(self.shape)
        self.tracks: dict[int, Track] = {t.id: t for t in init_tracks(np.asarray(label_frames[0]), self.cfg, marked)}
        self.next_id = max(self.tracks, default=0) + 1
        self.motion_available = raw_frames is not None
        self.t = 0

    def _raw(self, t):
        return None if self.raw is None else np.asarray(self.raw[t], dtype=np.float64)

    def active_tracks(self, t: int) -> list[Track]:
        return [tr for tr in self.tracks.values() if tr.is_active(t, self.cfg.delta_t)]

    def step(self, t: int):
        if t != self.t:
            raise ValueError(f"tracker expects step {self.t}, got {t}")
        cfg = self.cfg
        frame_t, frame_t1 = self._raw(t), self._raw(t + 1)
        active = self.active_tracks(t)
        for tr in active:
            d = roi_shift(tr.roi, frame_t, frame_t1)
            tr.pending_shift = tr.pending_shift + np.asarray(d, dtype=np.float64)
            tr.roi = update_roi(tr.roi, d, self.shape)

        cands = object_stats(np.asarray(self.labels[t + 1]))
        by_id = {c.id: c for c in cands}
        inputs = [
            TrackInput(
                id=tr.id,
                predicted_position=tuple(tr.predicted_position()),
                size=tr.last.size,
                roi_contains=(lambda p, roi=tr.roi: roi.contains(p, self.shape)),
                disappearance_cost=float(tr.roi.largest_edge()),
            )
            for tr in active
        ]
        graph = build_graph(inputs, cands, cfg.alpha, cfg.beta, cfg.gamma_factor, cfg.rho_multiplier)
        result = solve_matching(graph)

        for tid, cid in result.links:
            self.tracks[tid].assign(t + 1, by_id[cid], self.shape)
        for tid, a, b in result.splits:
            parent = self.tracks[tid]
            parent.closed = True
            for cid in (a, b):
                self._open(t + 1, by_id[cid], parent_id=tid)
        if cfg.track_all:
            for cid in result.appeared:
                self._open(t + 1, by_id[cid])
        self.t += 1
        return result

    def _open(self, t: int, stats: ObjectStats, parent_id: int = 0) -> Track:
        tr = new_track(self.next_id, t, stats, self.cfg, self.shape, parent_id)
        self.tracks[tr.id] = tr
        self.next_id += 1
        return tr


@dataclass
class TrackingResult:
    tracks: list[Track]
    label_frames: list[np.ndarray]
    motion_estimated: bool

    def lineage(self) -> list[tuple[int, int, int, int]]:
        """Rows ``(L, B, E, P)`` in track-ID order."""
        return [(tr.id, *tr.span(), tr.parent_id) for tr in sorted(self.tracks, key=lambda t: t.id)]


def _mask_coords(labels: np.ndarray, stats: ObjectStats) -> tuple[np.ndarray, ...]:
    sl = tuple(slice(a, b) for a, b in stats.bbox)
    local = np.nonzero(labels[sl] == stats.id)
    return tuple(c + s.start for c, s in zip(local, sl))


def _place(coords, offset, shape):
    """Translate coordinates by a rounded offset, dropping those leaving the image."""
    moved = [c + int(round(o)) for c, o in zip(coords, offset)]
    keep = np.ones(len(moved[0]), dtype=bool)
    for c, n in zip(moved, shape):
        keep &= (c >= 0) & (c < n)
    return tuple(c[keep] for c in moved)


def postprocess_lineage(tracks: list[Track], label_frames) -> TrackingResult:
    """Fill gaps by interpolated masks, drop orphan single-frame tracks, patch empty frames.

    Returns relabeled frames where each pixel holds its track ID.
    """
    n_frames = len(label_frames)
    shape = np.shape(label_frames[0])
    by_id = {tr.id: tr for tr in tracks}
    children: dict[int, list[int]] = {}
    for tr in tracks:
        if tr.parent_id:
            children.setdefault(tr.parent_id, []).append(tr.id)

    # orphan single-frame trajectories
    keep = [tr for tr in tracks
            if not (len(tr.assignments) == 1 and tr.parent_id == 0 and tr.id not in children)]
    removed = len(tracks) - len(keep)
    if removed:
        log.info("removed %d single-frame orphan tracks", removed)

    out = [np.zeros(shape, dtype=np.int64) for _ in range(n_frames)]
    for tr in keep:
        for t, st in tr.assignments.items():
            out[t][_mask_coords(np.asarray(label_frames[t]), st)] = tr.id

    # gap filling; a divided parent is extended up to the frame before its daughters
    for tr in keep:
        times = sorted(tr.assignments)
        anchors = [(t, np.asarray(tr.assignments[t].centroid)) for t in times]
        kids = [by_id[c] for c in children.get(tr.id, [])]
        if kids:
            born = min(k.first_time for k in kids)
            if born - 1 > times[-1]:
                mid = np.mean([k.assignments[k.first_time].centroid for k in kids], axis=0)
                anchors.append((born, mid))
        for (t0, p0), (t1, p1) in zip(anchors, anchors[1:]):
            if t1 - t0 < 2:
                continue
            coords = _mask_coords(np.asarray(label_frames[t0]), tr.assignments[t0])
            for g in range(t0 + 1, t1):
                w = (g - t0) / (t1 - t0)
                placed = _place(coords, w * (p1 - p0), shape)
                free = out[g][placed] == 0
                placed = tuple(c[free] for c in placed)
                out[g][placed] = tr.id
                tr.added_masks[g] = placed

    _fill_empty_frames(out, keep)
    return TrackingResult(keep, out, motion_estimated=False)


def _fill_empty_frames(out: list[np.ndarray], tracks: list[Track]) -> None:
    """Copy the temporally closest non-empty frame into frames without tracked objects."""
    nonempty = [t for t, f in enumerate(out) if f.any()]
    if not nonempty:
        return
    by_id = {tr.id: tr for tr in tracks}
    empty = [t for t in range(len(out)) if t not in set(nonempty)]
    src_for = {}
    for t in empty:
        # closest frame; earlier frame wins a tie
        src_for[t] = min(nonempty, key=lambda s: (abs(s - t), s))
    for t, s in src_for.items():
        out[t] = out[s].copy()
    for t, s in sorted(src_for.items()):
        for tid in np.unique(out[s]):
            if tid:
                by_id[int(tid)].added_masks[t] = tuple(np.nonzero(out[t] == tid))


def track_sequence(label_frames, raw_frames=None, cfg: TrackingConfig | None = None, marked=None) -> TrackingResult:
    """Track all frames and post-process the lineage."""
    label_frames = [np.asarray(f) for f in label_frames]
    if raw_frames is not None and len(raw_frames) != len(label_frames):
        raise ValueError("raw and label sequences differ in length")
    tracker = Tracker(label_frames, raw_frames, cfg, marked)
    for t in range(len(label_frames) - 1):
        tracker.step(t)
    result = postprocess_lineage(list(tracker.tracks.values()), label_frames)
    result.motion_estimated = tracker.motion_available
    if not tracker.motion_available:
        log.warning("no raw frames given: movement estimation skipped (zero shifts)")
    return result
