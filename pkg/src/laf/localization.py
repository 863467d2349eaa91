"""Video-level fusion and sliding-window temporal localization.

Per-step softmax activations are averaged over the whole video for
classification, and over fixed-length sliding windows for localization; the
windows of each label then go through greedy temporal non-maximum
suppression.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Interval, VideoSequence
from .errors import CorpusFormatError, ValidationError
from .ioutil import atomic_write_text
from .lstm import LstmModel, lstm_forward


@dataclass(frozen=True)
class LocalizationConfig:
    window_len: int = 10
    window_stride: int = 1
    nms_overlap: float = 0.5
    max_detections_per_label: int | None = None

    def __post_init__(self):
        if self.window_len < 1 or self.window_stride < 1:
            raise ValidationError("window_len and window_stride must be positive")
        if not (0.0 <= self.nms_overlap < 1.0):
            raise ValidationError("nms_overlap must lie in [0, 1)")
        if self.max_detections_per_label is not None and self.max_detections_per_label < 1:
            raise ValidationError("max_detections_per_label must be positive or None")


@dataclass(frozen=True)
class Detection:
    """A scored temporal window for one label in one video."""

    video_id: str
    label: int
    interval: Interval
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValidationError(f"detection score must be finite, got {self.score!r}")


def classify_video(step_probs: np.ndarray) -> np.ndarray:
    """Average fusion: the mean of per-step probability vectors."""
    step_probs = np.asarray(step_probs, dtype=np.float64)
    if step_probs.ndim != 2 or step_probs.shape[0] < 1:
        raise ValidationError(f"need a (T>=1, N) probability matrix, got {step_probs.shape}")
    return step_probs.mean(axis=0)


def sliding_window_scores(step_probs: np.ndarray, window_len: int,
                          window_stride: int = 1) -> list[tuple[Interval, np.ndarray]]:
    """Mean probabilities over [s, s+window_len) for s = 0, stride, 2*stride, ...

    A video shorter than the window yields a single whole-video window, so
    every video stays scoreable.
    """
    step_probs = np.asarray(step_probs, dtype=np.float64)
    steps = step_probs.shape[0]
    if steps < 1:
        raise ValidationError("need at least one step")
    if steps < window_len:
        return [(Interval(0, steps), step_probs.mean(axis=0))]
    return [(Interval(s, s + window_len), step_probs[s:s + window_len].mean(axis=0))
            for s in range(0, steps - window_len + 1, window_stride)]


def temporal_iou(a: Interval, b: Interval) -> float:
    """Intersection over union of two half-open step intervals."""
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union


def temporal_nms(detections: Sequence[Detection], nms_overlap: float) -> list[Detection]:
    """Greedy suppression within one label.

    Repeatedly keep the best remaining detection (ties: earlier start, then
    longer window) and drop everything overlapping it by more than
    ``nms_overlap``; the result is ordered by descending score.
    """
    labels = {d.label for d in detections}
    if len(labels) > 1:
        raise ValidationError(f"temporal_nms expects a single label, got {sorted(labels)}")
    ranked = sorted(detections, key=lambda d: (-d.score, d.interval.start, -d.interval.length))
    kept: list[Detection] = []
    for det in ranked:
        if all(temporal_iou(det.interval, k.interval) <= nms_overlap for k in kept):
            kept.append(det)
    return kept


def localize(model: LstmModel, video: VideoSequence, config: LocalizationConfig) -> dict[int, list[Detection]]:
    """Window-scored detections per label for one video, after per-label NMS."""
    if video.frames.shape[1] != model.input_dim:
        raise ValidationError(f"video {video.id!r} feature dim {video.frames.shape[1]} "
                              f"!= model input dim {model.input_dim}")
    _, probs, _ = lstm_forward(model, video.frames)
    windows = sliding_window_scores(probs, config.window_len, config.window_stride)
    result: dict[int, list[Detection]] = {}
    for label in range(model.num_labels):
        candidates = [Detection(video.id, label, interval, float(scores[label]))
                      for interval, scores in windows]
        kept = temporal_nms(candidates, config.nms_overlap)
        if config.max_detections_per_label is not None:
            kept = kept[:config.max_detections_per_label]
        result[label] = kept
    return result


def localize_videos(model: LstmModel, videos: Sequence[VideoSequence],
                    config: LocalizationConfig) -> list[Detection]:
    detections: list[Detection] = []
    for video in videos:
        for dets in localize(model, video, config).values():
            detections.extend(dets)
    return detections


def detection_lines(detections: Iterable[Detection]) -> list[str]:
    ordered = sorted(detections, key=lambda d: (d.label, -d.score, d.video_id, d.interval.start))
    return [json.dumps({"video_id": d.video_id, "label": d.label, "start": d.interval.start,
                        "end": d.interval.end, "score": d.score}, separators=(",", ":"))
            for d in ordered]


def save_detections(detections: Iterable[Detection], path: str | Path) -> None:
    """JSON Lines, sorted by (label, descending score)."""
    atomic_write_text(path, "\n".join(detection_lines(detections)) + "\n")


def load_detections(path: str | Path) -> list[Detection]:
    detections = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
        try:
            detections.append(Detection(video_id=str(rec["video_id"]), label=int(rec["label"]),
                                         interval=Interval(int(rec["start"]), int(rec["end"])),
                                         score=float(rec["score"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"line {line_no}: malformed detection record: {exc}") from exc
    return detections
