"""Synthetic moving, touching and dividing disk/ball cells with exact labels.

Used as ground truth for round-trip and tracking checks. Everything is driven
by one seeded generator so a config always produces the same sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core_image import ObjectStats, object_stats


@dataclass(frozen=True)
class SynthConfig:
    shape: tuple[int, ...] = (256, 256)
    n_frames: int = 40
    n_cells: int = 12
    radius_range: tuple[float, float] = (8.0, 12.0)
    velocity_range: tuple[float, float] = (0.5, 2.0)
    division_prob: float = 0.0
    # (frame, cell ID): the cell is replaced by two daughters in frame + 1
    forced_divisions: tuple[tuple[int, int], ...] = ()
    min_child_radius: float = 6.5
    min_gap: float = 3.0
    jitter: float = 0.2
    noise_std: float = 0.05
    background: float = 0.1
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if len(self.shape) not in (2, 3):
            raise ValueError("shape must have 2 or 3 axes")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius_range must satisfy 0 < min <= max")
        if self.n_frames < 1 or self.n_cells < 0:
            raise ValueError("n_frames must be >= 1 and n_cells >= 0")
        if min(self.shape) < 2 * hi + 4:
            raise ValueError(f"image extents {self.shape} too small for radius {hi}")


@dataclass
class SyntheticSequence:
    raw: list[np.ndarray]
    labels: list[np.ndarray]
    # track ID -> (begin frame, end frame, parent ID)
    lineage: dict[int, tuple[int, int, int]]
    stats: list[list[ObjectStats]] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return len(self.labels)

    def lineage_rows(self) -> list[tuple[int, int, int, int]]:
        return [(tid, b, e, p) for tid, (b, e, p) in sorted(self.lineage.items())]


@dataclass
class _Cell:
    id: int
    center: np.ndarray
    radius: float
    velocity: np.ndarray


def _random_unit(rng: np.random.Generator, ndim: int) -> np.ndarray:
    v = rng.normal(size=ndim)
    return v / np.linalg.norm(v)


def _inside(center, radius, shape) -> bool:
    return all(radius + 1 <= c <= n - 2 - radius for c, n in zip(center, shape))


def _clear_of(center, radius, others, gap) -> bool:
    return all(np.linalg.norm(center - o.center) >= radius + o.radius + gap for o in others)


def render_labels(cells, shape) -> np.ndarray:
    """Rasterize disks; a pixel covered twice goes to the cell it is relatively deepest in."""
    labels = np.zeros(shape, dtype=np.int32)
    depth = np.full(shape, np.inf)
    for c in sorted(cells, key=lambda c: c.id):
        r = c.radius
        sl = tuple(slice(max(int(math.floor(x - r)), 0), min(int(math.ceil(x + r)) + 1, n))
                   for x, n in zip(c.center, shape))
        grids = np.meshgrid(*[np.arange(s.start, s.stop) for s in sl], indexing="ij")
        rel = np.sqrt(sum((g - x) ** 2 for g, x in zip(grids, c.center))) / r
        win = (rel <= 1.0) & (rel < depth[sl])
        labels[sl][win] = c.id
        depth[sl][win] = rel[win]
    return labels


def render_raw(cells, labels: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Bright cells with a smooth radial profile on a dark noisy background."""
    img = np.full(labels.shape, cfg.background, dtype=np.float64)
    grids = np.indices(labels.shape, dtype=np.float64)
    for c in cells:
        inside = labels == c.id
        d2 = sum((g[inside] - x) ** 2 for g, x in zip(grids, c.center)) / c.radius**2
        img[inside] += cfg.amplitude * (0.6 + 0.4 * np.clip(1.0 - d2, 0.0, 1.0))
    img += rng.normal(0.0, cfg.noise_std, size=labels.shape)
    return img.astype(np.float32)


def _place_initial(cfg: SynthConfig, rng: np.random.Generator) -> list[_Cell]:
    cells: list[_Cell] = []
    lo, hi = cfg.radius_range
    vlo, vhi = cfg.velocity_range
    for i in range(1, cfg.n_cells + 1):
        for _ in range(2000):
            r = rng.uniform(lo, hi)
            center = np.array([rng.uniform(r + 1, n - 2 - r) for n in cfg.shape])
            if _clear_of(center, r, cells, cfg.min_gap):
                break
        else:
            raise ValueError(f"could not place {cfg.n_cells} cells in {cfg.shape}; packing infeasible")
        v = rng.uniform(vlo, vhi) * _random_unit(rng, len(cfg.shape))
        cells.append(_Cell(i, center, r, v))
    return cells


def _try_divide(cell: _Cell, others, next_id: int, cfg: SynthConfig, rng) -> list[_Cell] | None:
    ndim = len(cfg.shape)
    rc = cell.radius / 2.0 ** (1.0 / ndim)
    base = _random_unit(rng, ndim)
    for attempt in range(24):
        if ndim == 2:
            a = attempt * math.pi / 12
            u = np.array([base[0] * math.cos(a) - base[1] * math.sin(a),
                          base[0] * math.sin(a) + base[1] * math.cos(a)])
        else:
            u = base if attempt == 0 else _random_unit(rng, ndim)
        c1, c2 = cell.center + rc * u, cell.center - rc * u
        if not (_inside(c1, rc, cfg.shape) and _inside(c2, rc, cfg.shape)):
            continue
        if _clear_of(c1, rc, others, cfg.min_gap) and _clear_of(c2, rc, others, cfg.min_gap):
            return [_Cell(next_id, c1, rc, cell.velocity + 0.5 * u),
                    _Cell(next_id + 1, c2, rc, cell.velocity - 0.5 * u)]
    return None


def _move(cells: list[_Cell], cfg: SynthConfig, rng) -> None:
    """Constant velocity plus jitter, reflecting at borders; blocked moves reverse the cell."""
    shape = cfg.shape
    for i, c in enumerate(cells):
        step = c.velocity + rng.normal(0.0, cfg.jitter, size=len(shape))
        new = c.center + step
        for ax, n in enumerate(shape):
            lo, hi = c.radius + 1, n - 2 - c.radius
            if new[ax] < lo:
                new[ax] = 2 * lo - new[ax]
                c.velocity[ax] = -c.velocity[ax]
            elif new[ax] > hi:
                new[ax] = 2 * hi - new[ax]
                c.velocity[ax] = -c.velocity[ax]
            new[ax] = min(max(new[ax], lo), hi)
        blocked = False
        for j, o in enumerate(cells):
            if j == i:
                continue
            need = c.radius + o.radius + cfg.min_gap
            d_new = np.linalg.norm(new - o.center)
            # pairs already closer than the gap (fresh daughters) may only separate
            if d_new < need and d_new < np.linalg.norm(c.center - o.center):
                blocked = True
                break
        if blocked:
            c.velocity = -c.velocity
        else:
            c.center = new


def generate(cfg: SynthConfig) -> SyntheticSequence:
    rng = np.random.default_rng(cfg.seed)
    cells = _place_initial(cfg, rng)
    lineage = {c.id: [0, 0, 0] for c in cells}
    next_id = cfg.n_cells + 1
    forced = set(cfg.forced_divisions)
    frames_cells = [[_copy(c) for c in cells]]

    for f in range(1, cfg.n_frames):
        survivors: list[_Cell] = []
        born: list[_Cell] = []
        for c in cells:
            draw = rng.random()
            wants = (f - 1, c.id) in forced or (
                draw < cfg.division_prob
                and c.radius / 2.0 ** (1.0 / len(cfg.shape)) >= cfg.min_child_radius
                and f - 1 > lineage[c.id][0]
            )
            if wants:
                others = [o for o in cells if o is not c] + born
                kids = _try_divide(c, others, next_id, cfg, rng)
                if kids is None and (f - 1, c.id) in forced:
                    raise ValueError(f"forced division of cell {c.id} at frame {f - 1} has no room")
                if kids is not None:
                    lineage[c.id][1] = f - 1
                    for k in kids:
                        lineage[k.id] = [f, f, c.id]
                    next_id += 2
                    born.extend(kids)
                    continue
            survivors.append(c)
        _move(survivors, cfg, rng)
        cells = survivors + born
        for c in cells:
            lineage[c.id][1] = f
        frames_cells.append([_copy(c) for c in cells])

    missing = sorted({oid for _, oid in forced} - set(lineage))
    if missing:
        raise ValueError(f"forced divisions name unknown cells {missing}")

    labels, raw, stats = [], [], []
    for fc in frames_cells:
        lab = render_labels(fc, cfg.shape)
        labels.append(lab)
        raw.append(render_raw(fc, lab, cfg, rng))
        stats.append(object_stats(lab))
    return SyntheticSequence(raw, labels, {k: tuple(v) for k, v in lineage.items()}, stats)


def _copy(c: _Cell) -> _Cell:
    return _Cell(c.id, c.center.copy(), c.radius, c.velocity.copy())


def corrupt(seq: SyntheticSequence, drop) -> SyntheticSequence:
    """Delete the listed ``(frame, id)`` masks; the ground-truth lineage is kept for scoring."""
    labels = [lab.copy() for lab in seq.labels]
    for frame, oid in sorted(set(drop)):
        if not 0 <= frame < len(labels) or not (labels[frame] == oid).any():
            raise ValueError(f"object {oid} not present in frame {frame}")
        labels[frame][labels[frame] == oid] = 0
    return replace(seq, labels=labels, stats=[object_stats(lab) for lab in labels])


def disk_frame(shape, n_cells: int, radius_range, n_touching_pairs: int, rng: np.random.Generator,
               min_gap: float = 3.0) -> np.ndarray:
    """A single label frame of disks where ``n_touching_pairs`` pairs touch exactly."""
    if 2 * n_touching_pairs > n_cells:
        raise ValueError("more touching cells requested than cells")
    lo, hi = radius_range
    cells: list[_Cell] = []
    ndim = len(shape)

    def attempt(make):
        for _ in range(5000):
            new = make()
            if all(_inside(c.center, c.radius, shape) for c in new) and all(
                _clear_of(c.center, c.radius, cells, min_gap) for c in new
            ):
                cells.extend(new)
                return
        raise ValueError("could not place disks; packing infeasible")

    for _ in range(n_touching_pairs):
        def pair():
            r1, r2 = rng.uniform(lo, hi, size=2)
            c1 = np.array([rng.uniform(r1 + 1, n - 2 - r1) for n in shape])
            c2 = c1 + (r1 + r2) * _random_unit(rng, ndim)
            return [_Cell(len(cells) + 1, c1, r1, np.zeros(ndim)), _Cell(len(cells) + 2, c2, r2, np.zeros(ndim))]
        attempt(pair)
    while len(cells) < n_cells:
        def single():
            r = rng.uniform(lo, hi)
            c = np.array([rng.uniform(r + 1, n - 2 - r) for n in shape])
            return [_Cell(len(cells) + 1, c, r, np.zeros(ndim))]
        attempt(single)
    return render_labels(cells, shape)
