"""Frame-wise multilabel F1 scoring and frame/segment conversions.

Time convention: frame i owns the half-open interval
[i*step, (i+1)*step).  A frame is active for a segment iff its start
lies inside the segment, which makes frames -> segments -> frames an
exact round trip when min_dur is 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distill import LabeledSegments
from .errors import ConfigError, ShapeError
from .segnet import CLASSES


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class F1Report:
    scores: dict = field(default_factory=dict)   # class name -> ClassScore


@dataclass
class SegmentList:
    by_class: dict = field(default_factory=dict)  # class -> [(onset_s, offset_s)]


def binarize(probabilities: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """1 where p > threshold (strict, so exactly 0.5 maps to 0)."""
    return (np.asarray(probabilities) > threshold).astype(np.uint8)


def _prf(tp: int, fp: int, fn: int):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def frame_f1(pred: np.ndarray, ref: LabeledSegments,
             classes=CLASSES) -> F1Report:
    """Per-class precision/recall/F1 over frames; unavailable classes are
    skipped."""
    pred = np.asarray(pred)
    if pred.shape != ref.labels.shape:
        raise ShapeError(f"prediction {pred.shape} vs reference "
                         f"{ref.labels.shape}")
    if pred.shape[1] == 0:
        raise ShapeError("cannot score zero frames")
    report = F1Report()
    for c, name in enumerate(classes):
        if not ref.available[c]:
            continue
        hyp = pred[c] > 0
        gold = ref.labels[c] > 0
        tp = int(np.sum(hyp & gold))
        fp = int(np.sum(hyp & ~gold))
        fn = int(np.sum(~hyp & gold))
        p, r, f1 = _prf(tp, fp, fn)
        report.scores[name] = ClassScore(p, r, f1, int(gold.sum()))
    return report


def frames_to_segments(binary: np.ndarray, frame_step_s: float,
                       min_dur_s: float = 0.0,
                       classes=CLASSES) -> SegmentList:
    """Maximal runs of active frames become (onset, offset) intervals;
    runs shorter than min_dur_s are dropped."""
    if min_dur_s < 0:
        raise ConfigError(f"min_dur_s must be >= 0, got {min_dur_s}")
    binary = np.atleast_2d(np.asarray(binary))
    out = SegmentList()
    for c in range(binary.shape[0]):
        row = np.concatenate(([0], binary[c] > 0, [0])).astype(np.int8)
        edges = np.flatnonzero(np.diff(row))
        segs = []
        for start, stop in zip(edges[::2], edges[1::2]):
            onset = start * frame_step_s
            offset = stop * frame_step_s
            if offset - onset >= min_dur_s:
                segs.append((onset, offset))
        out.by_class[classes[c]] = segs
    return out


def segments_to_frames(segments: SegmentList, num_frames: int,
                       frame_step_s: float, classes=CLASSES) -> np.ndarray:
    """Inverse of frames_to_segments for the same frame grid."""
    binary = np.zeros((len(classes), num_frames), dtype=np.uint8)
    starts = np.arange(num_frames) * frame_step_s
    for c, name in enumerate(classes):
        for onset, offset in segments.by_class.get(name, ()):
            binary[c, (starts >= onset - 1e-9) & (starts < offset - 1e-9)] = 1
    return binary


# -------------------------------------------------------------- file I/O ----

def write_segments(path, segments: SegmentList, file_id: str) -> None:
    """One `SEG <class> <file-id> <onset> <duration>` line per interval."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for name in sorted(segments.by_class):
        for onset, offset in segments.by_class[name]:
            lines.append(f"SEG {name} {file_id} {onset:.3f} {offset - onset:.3f}")
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_segments(path) -> dict:
    """Parse SEG lines; returns {file_id: SegmentList}."""
    result: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5 or parts[0] != "SEG":
            raise ConfigError(f"{path}:{lineno}: expected "
                              f"'SEG <class> <file-id> <onset> <duration>'")
        _, name, file_id, onset, dur = parts
        seglist = result.setdefault(file_id, SegmentList())
        seglist.by_class.setdefault(name, []).append(
            (float(onset), float(onset) + float(dur)))
    for seglist in result.values():
        for segs in seglist.by_class.values():
            segs.sort()
    return result


# -------------------------------------------------------------- reports ----

def report_to_csv(report: F1Report, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        for name, s in report.scores.items():
            writer.writerow([name, f"{s.precision:.6f}", f"{s.recall:.6f}",
                             f"{s.f1:.6f}", s.support])


def format_report(report: F1Report, title: str = "frame-wise F1") -> str:
    classes = list(report.scores)
    width = max([len(c) for c in classes] + [5])
    lines = [title, "-" * len(title)]
    header = "class".ljust(width) + "  precision  recall  F1(%)   support"
    lines.append(header)
    for name in classes:
        s = report.scores[name]
        lines.append(f"{name.ljust(width)}  {s.precision:9.3f}  {s.recall:6.3f}"
                     f"  {100 * s.f1:6.1f}  {s.support:8d}")
    return "\n".join(lines)
