"""File conventions: 16-bit label TIFFs, 32-bit float maps, CTC track text files.

All writers go through a temporary file in the target directory followed by
``os.replace`` so a crash never leaves a half-written output behind.
"""

from __future__ import annotations

import os
import re
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import tifffile

MAX_LABEL = 65535


@contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_tiff(path, data: np.ndarray) -> None:
    with atomic_path(path) as tmp:
        # no timestamps or software tag, so identical data gives identical bytes
        tifffile.imwrite(tmp, data, photometric="minisblack", metadata=None, software=False)


def write_label_tiff(path, labels: np.ndarray) -> None:
    """Write a 2D label image or a 3D stack (one page per z slice) as uint16."""
    labels = np.asarray(labels)
    if labels.ndim not in (2, 3):
        raise ValueError(f"label image must be 2D or 3D, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise ValueError("label IDs must be non-negative")
    if labels.size and labels.max() > MAX_LABEL:
        raise ValueError(
            f"label ID {int(labels.max())} exceeds {MAX_LABEL}, the 16-bit TIFF limit; relabel first"
        )
    _write_tiff(path, labels.astype(np.uint16))


def read_label_tiff(path) -> np.ndarray:
    data = tifffile.imread(path)
    if not np.issubdtype(data.dtype, np.integer):
        raise ValueError(f"{path}: expected an integer label image, got {data.dtype}")
    return data.astype(np.int32)


def write_float_tiff(path, data: np.ndarray) -> None:
    _write_tiff(path, np.asarray(data, dtype=np.float32))


def read_float_tiff(path) -> np.ndarray:
    return tifffile.imread(path).astype(np.float64)


def write_track_file(path, rows) -> None:
    """``L B E P`` per line, space separated."""
    text = "".join(f"{int(l)} {int(b)} {int(e)} {int(p)}\n" for l, b, e, p in rows)
    with atomic_path(path) as tmp:
        tmp.write_text(text)


def read_track_file(path) -> list[tuple[int, int, int, int]]:
    rows = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{n}: expected 4 columns 'L B E P', got {line!r}")
        rows.append(tuple(int(p) for p in parts))
    return rows


def frame_name(prefix: str, t: int, n_frames: int) -> str:
    width = max(3, len(str(max(n_frames - 1, 0))))
    return f"{prefix}{t:0{width}d}.tif"


def list_frames(directory, prefix: str) -> list[Path]:
    """Files ``<prefix><digits>.tif`` sorted by time index; indices must be 0..T-1."""
    pattern = re.compile(rf"^{re.escape(prefix)}(\d+)\.tiff?$")
    found = {}
    for p in Path(directory).iterdir():
        m = pattern.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if sorted(found) != list(range(len(found))):
        raise ValueError(f"{directory}: '{prefix}' frames are not numbered 0..{len(found) - 1}")
    return [found[t] for t in range(len(found))]
