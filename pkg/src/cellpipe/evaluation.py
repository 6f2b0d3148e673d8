"""Segmentation and tracking scores.

SEG follows the Cell Tracking Challenge rule: a result object matches a
reference object when it covers strictly more than half of it. The detection
score and the lineage error counts are simple stand-ins for the graph-matching
DET/TRA measures and are labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


def _overlaps(reference: np.ndarray, result: np.ndarray):
    """Reference IDs, their sizes, and the majority-overlap partner (0 if none) for each."""
    reference = np.asarray(reference)
    result = np.asarray(result)
    if reference.shape != result.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {result.shape}")
    fg = reference != 0
    ref_ids, ref_sizes = np.unique(reference[fg], return_counts=True)
    if not len(ref_ids):
        return ref_ids, {}, {}, {}
    pairs, counts = np.unique(
        np.stack([reference[fg], result[fg]]), axis=1, return_counts=True
    )
    partner = {int(r): 0 for r in ref_ids}
    inter = {int(r): 0 for r in ref_ids}
    size_of = dict(zip(ref_ids.tolist(), ref_sizes.tolist()))
    for (r, s), c in zip(pairs.T.tolist(), counts.tolist()):
        if s != 0 and 2 * c > size_of[r]:
            partner[r] = s
            inter[r] = c
    return ref_ids, size_of, partner, inter


def _frame_seg(reference, result) -> list[float]:
    ref_ids, size_of, partner, inter = _overlaps(reference, result)
    result = np.asarray(result)
    res_sizes = dict(zip(*(a.tolist() for a in np.unique(result[result != 0], return_counts=True))))
    return [
        inter[r] / (size_of[r] + res_sizes[partner[r]] - inter[r]) if partner[r] else 0.0
        for r in ref_ids.tolist()
    ]


def seg_score(reference: np.ndarray, result: np.ndarray) -> float:
    """Mean Jaccard index over reference objects (0 for unmatched ones)."""
    scores = _frame_seg(reference, result)
    if not scores:
        raise ValueError("reference contains no objects; SEG is undefined")
    return _mean(scores)


def sequence_seg(references, results) -> float:
    """SEG pooled over all reference objects of all frames."""
    scores = []
    for ref, res in zip(references, results):
        scores.extend(_frame_seg(ref, res))
    if not scores:
        raise ValueError("references contain no objects; SEG is undefined")
    return _mean(scores)


def _mean(values) -> float:
    # exactly rounded, so the result does not depend on object order
    return math.fsum(values) / len(values)


def _detection_counts(reference, result) -> tuple[int, int, int]:
    _, _, partner, _ = _overlaps(reference, result)
    matched = {s for s in partner.values() if s}
    n_res = len(np.unique(np.asarray(result)[np.asarray(result) != 0]))
    return len(matched), len(partner), n_res


def det_simple(reference: np.ndarray, result: np.ndarray) -> float:
    """F1 of object detection under majority-overlap matching."""
    return _f1(*_detection_counts(reference, result))


def sequence_det_simple(references, results) -> float:
    tp = n_ref = n_res = 0
    for ref, res in zip(references, results):
        a, b, c = _detection_counts(ref, res)
        tp, n_ref, n_res = tp + a, n_ref + b, n_res + c
    return _f1(tp, n_ref, n_res)


def _f1(tp: int, n_ref: int, n_res: int) -> float:
    if n_ref + n_res == 0:
        return 1.0
    return 2.0 * tp / (n_ref + n_res)


def op_csb(det: float, seg: float) -> float:
    return 0.5 * (det + seg)


def op_ctb(seg: float, tra: float) -> float:
    return 0.5 * (seg + tra)


@dataclass(frozen=True)
class LineageErrors:
    missed_links: int = 0
    wrong_links: int = 0
    missed_divisions: int = 0
    spurious_divisions: int = 0
    reference_links: int = 0

    def tra_proxy(self) -> float:
        """1 - link errors / reference links, floored at 0. Not the official TRA."""
        if self.reference_links == 0:
            return 1.0 if self.wrong_links == 0 else 0.0
        return max(0.0, 1.0 - (self.missed_links + self.wrong_links) / self.reference_links)


def _links(label_frames, rows):
    """Temporal links as ((t, id), (t', id')) plus divisions as parent -> set of child first objects."""
    present = [set(np.unique(f).tolist()) - {0} for f in label_frames]
    links = set()
    first, last = {}, {}
    for tid, b, e, _ in rows:
        times = [t for t in range(b, e + 1) if t < len(present) and tid in present[t]]
        if not times:
            continue
        first[tid], last[tid] = (times[0], tid), (times[-1], tid)
        links.update(((a, tid), (c, tid)) for a, c in zip(times, times[1:]))
    divisions = {}
    for tid, _, _, parent in rows:
        if parent and parent in last and tid in first:
            links.add((last[parent], first[tid]))
            divisions.setdefault(last[parent], set()).add(first[tid])
    return links, divisions


def lineage_errors(ref_frames, ref_rows, res_frames, res_rows) -> LineageErrors:
    """Count link and division disagreements after per-frame majority-overlap matching."""
    if len(ref_frames) != len(res_frames):
        raise ValueError("reference and result cover different frame ranges")
    # result object -> reference object; result objects covering several references keep the first
    to_ref = {}
    for t, (ref, res) in enumerate(zip(ref_frames, res_frames)):
        _, _, partner, _ = _overlaps(ref, res)
        for r, s in sorted(partner.items()):
            if s:
                to_ref.setdefault((t, s), (t, r))

    ref_links, ref_div = _links(ref_frames, ref_rows)
    res_links, res_div = _links(res_frames, res_rows)
    mapped = set()
    unmapped = 0
    for a, b in res_links:
        if a in to_ref and b in to_ref:
            mapped.add((to_ref[a], to_ref[b]))
        else:
            unmapped += 1
    missed = len(ref_links - mapped)
    wrong = len(mapped - ref_links) + unmapped

    res_div_mapped = {}
    for p, kids in res_div.items():
        if p in to_ref and all(k in to_ref for k in kids):
            res_div_mapped[to_ref[p]] = {to_ref[k] for k in kids}
    missed_div = sum(1 for p, kids in ref_div.items() if res_div_mapped.get(p) != kids)
    spurious_div = sum(1 for p, kids in res_div_mapped.items() if ref_div.get(p) != kids)
    spurious_div += len(res_div) - len(res_div_mapped)
    return LineageErrors(missed, wrong, missed_div, spurious_div, len(ref_links))


@dataclass(frozen=True)
class ScoreReport:
    seg: float
    det_simple: float
    tra_lineage_errors: LineageErrors
    op_csb: float
    op_ctb_proxy: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        e = self.tra_lineage_errors
        lines = [
            f"seg={self.seg:.6f}",
            f"det_simple={self.det_simple:.6f}",
            f"missed_links={e.missed_links}",
            f"wrong_links={e.wrong_links}",
            f"missed_divisions={e.missed_divisions}",
            f"spurious_divisions={e.spurious_divisions}",
            f"reference_links={e.reference_links}",
            f"op_csb={self.op_csb:.6f}",
            f"op_ctb_proxy={self.op_ctb_proxy:.6f}",
        ]
        return "\n".join(lines) + "\n"


def score_sequence(ref_frames, ref_rows, res_frames, res_rows) -> ScoreReport:
    seg = sequence_seg(ref_frames, res_frames)
    det = sequence_det_simple(ref_frames, res_frames)
    errors = lineage_errors(ref_frames, ref_rows, res_frames, res_rows)
    return ScoreReport(seg, det, errors, op_csb(det, seg), op_ctb(seg, errors.tra_proxy()))
