"""Stage functions and the end-to-end runner behind the CLI.

Directory layout (CTC style) relative to a dataset root / output root::

    01/tNNN.tif                   raw frames
    01_GT/TRA/maskNNN.tif         reference labels
    01_GT/TRA/man_track.txt       reference lineage
    01_PRED/cellNNN.tif           cell distance maps (float32)
    01_PRED/neighborNNN.tif       neighbor distance maps (float32)
    01_SEG/maskNNN.tif            untracked segmentation
    01_RES/maskNNN.tif            tracked segmentation
    01_RES/res_track.txt          result lineage
    score.txt / score.json        evaluation
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig
from .evaluation import ScoreReport, score_sequence
from .labelgen import LabelGenConfig, RepresentationPair, make_representation_pair
from .segment import SegmentationConfig, segment_frame
from .synth import SynthConfig, generate
from .tracking import TrackingConfig, track_sequence

log = logging.getLogger(__name__)

THREADS_ENV = "CELLPIPE_THREADS"

RAW_DIR = "01"
GT_DIR = "01_GT/TRA"
PRED_DIR = "01_PRED"
SEG_DIR = "01_SEG"
RES_DIR = "01_RES"


class MissingInputError(FileNotFoundError):
    pass


class EmptyResultWarning(Exception):
    """Raised after all outputs are written when a stage produced no objects."""


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, items):
    # ordered map; results do not depend on the thread count
    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        return list(pool.map(fn, items))


def _frames(directory: Path, prefix: str) -> list[Path]:
    if not directory.is_dir():
        raise MissingInputError(f"input directory not found: {directory}")
    files = io.list_frames(directory, prefix)
    if not files:
        raise MissingInputError(f"no '{prefix}NNN.tif' frames in {directory}")
    return files


def _track_file(directory: Path, *names: str) -> Path:
    for n in names:
        if (directory / n).is_file():
            return directory / n
    raise MissingInputError(f"no {' or '.join(names)} in {directory}")


def write_sequence(root: Path, raw, labels, lineage_rows) -> None:
    n = len(labels)
    for t, (img, lab) in enumerate(zip(raw, labels)):
        io.write_float_tiff(root / RAW_DIR / io.frame_name("t", t, n), img)
        io.write_label_tiff(root / GT_DIR / io.frame_name("mask", t, n), lab)
    io.write_track_file(root / GT_DIR / "man_track.txt", lineage_rows)


def stage_synth(cfg: SynthConfig, root: Path) -> int:
    seq = generate(cfg)
    write_sequence(root, seq.raw, seq.labels, seq.lineage_rows())
    return sum(len(s) for s in seq.stats)


def stage_labelgen(label_dir: Path, pred_dir: Path, cfg: LabelGenConfig) -> int:
    files = _frames(label_dir, "mask")
    n = len(files)

    def one(item):
        t, path = item
        labels = io.read_label_tiff(path)
        pair = make_representation_pair(labels, cfg)
        io.write_float_tiff(pred_dir / io.frame_name("cell", t, n), pair.cell)
        io.write_float_tiff(pred_dir / io.frame_name("neighbor", t, n), pair.neighbor)
        return len(np.unique(labels[labels != 0]))

    return sum(_map(one, list(enumerate(files))))


def stage_segment(pred_dir: Path, seg_dir: Path, cfg: SegmentationConfig) -> int:
    cells = _frames(pred_dir, "cell")
    neighbors = _frames(pred_dir, "neighbor")
    if len(cells) != len(neighbors):
        raise MissingInputError(f"{pred_dir}: {len(cells)} cell maps but {len(neighbors)} neighbor maps")
    n = len(cells)

    def one(t):
        pair = RepresentationPair(io.read_float_tiff(cells[t]), io.read_float_tiff(neighbors[t]))
        labels = segment_frame(pair, cfg)
        io.write_label_tiff(seg_dir / io.frame_name("mask", t, n), labels)
        return int(labels.max())

    return sum(_map(one, range(n)))


def stage_track(raw_dir: Path | None, label_dir: Path, res_dir: Path, cfg: TrackingConfig) -> int:
    label_files = _frames(label_dir, "mask")
    labels = [io.read_label_tiff(p) for p in label_files]
    raw = None
    if raw_dir is not None and raw_dir.is_dir():
        raw_files = io.list_frames(raw_dir, "t")
        if len(raw_files) == len(labels):
            raw = [io.read_float_tiff(p) for p in raw_files]
        else:
            log.warning("raw frame count differs from label frames; movement estimation disabled")
    result = track_sequence(labels, raw, cfg)
    n = len(labels)
    for t, frame in enumerate(result.label_frames):
        io.write_label_tiff(res_dir / io.frame_name("mask", t, n), frame)
    io.write_track_file(res_dir / "res_track.txt", result.lineage())
    return len(result.tracks)


def stage_score(ref_dir: Path, res_dir: Path, out_dir: Path | None = None) -> ScoreReport:
    ref_files = _frames(ref_dir, "mask")
    res_files = _frames(res_dir, "mask")
    if len(ref_files) != len(res_files):
        raise MissingInputError(f"{ref_dir} has {len(ref_files)} frames but {res_dir} has {len(res_files)}")
    report = score_sequence(
        [io.read_label_tiff(p) for p in ref_files],
        io.read_track_file(_track_file(ref_dir, "man_track.txt", "res_track.txt")),
        [io.read_label_tiff(p) for p in res_files],
        io.read_track_file(_track_file(res_dir, "res_track.txt", "man_track.txt")),
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: ScoreReport, out_dir: Path) -> None:
    with io.atomic_path(out_dir / "score.txt") as tmp:
        tmp.write_text(report.to_text())
    with io.atomic_path(out_dir / "score.json") as tmp:
        tmp.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class StageRecord:
    name: str
    seconds: float
    objects: int


def check_inputs(cfg: PipelineConfig) -> None:
    """Fail before writing anything if a stage's input is neither on disk nor produced earlier."""
    stages = cfg.pipeline.stages
    produced = set()
    src, out = cfg.input_dir, cfg.output_dir

    def need(path: Path, what: str):
        if what not in produced and not path.is_dir():
            raise MissingInputError(f"stage input missing: {path}")

    for stage in stages:
        if stage == "synth":
            produced.update({"raw", "gt"})
        elif stage == "labelgen":
            need(src / GT_DIR, "gt")
            produced.add("pred")
        elif stage == "segment":
            need(out / PRED_DIR, "pred")
            produced.add("seg")
        elif stage == "track":
            need(out / SEG_DIR, "seg")
            produced.add("res")
        elif stage == "score":
            need(src / GT_DIR, "gt")
            need(out / RES_DIR, "res")


def run_pipeline(cfg: PipelineConfig, echo=print) -> tuple[list[StageRecord], ScoreReport | None]:
    check_inputs(cfg)
    src, out = cfg.input_dir, cfg.output_dir
    if "synth" in cfg.pipeline.stages:
        src = out
    records: list[StageRecord] = []
    report = None
    empty = []
    for stage in cfg.pipeline.stages:
        start = time.perf_counter()
        if stage == "synth":
            count = stage_synth(cfg.synth, out)
        elif stage == "labelgen":
            count = stage_labelgen(src / GT_DIR, out / PRED_DIR, cfg.labelgen)
        elif stage == "segment":
            count = stage_segment(out / PRED_DIR, out / SEG_DIR, cfg.segmentation)
        elif stage == "track":
            count = stage_track(src / RAW_DIR, out / SEG_DIR, out / RES_DIR, cfg.tracking)
        else:
            report = stage_score(src / GT_DIR, out / RES_DIR, out)
            count = report.tra_lineage_errors.reference_links
        rec = StageRecord(stage, time.perf_counter() - start, count)
        records.append(rec)
        echo(f"stage={rec.name} seconds={rec.seconds:.2f} objects={rec.objects}")
        if stage in ("segment", "track") and count == 0:
            empty.append(stage)
    if report is not None:
        echo(report.to_text().rstrip("\n"))
    if empty:
        raise EmptyResultWarning(f"stage(s) {', '.join(empty)} produced no objects")
    return records, report
