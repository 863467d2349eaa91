"""Hit@k classification metric and mean average precision at temporal overlap.

A detection counts as a true positive at ratio r when its interval IoU with
some still-unmatched ground-truth segment of the same video strictly exceeds
r; each segment can be matched once, and duplicates count as false
positives. AP is the raw (non-interpolated) sum of precisions at true-positive
ranks divided by the number of ground-truth segments; an interpolated variant
is available behind a config flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Interval, VideoSequence
from .errors import ValidationError
from .localization import Detection, temporal_iou


@dataclass(frozen=True)
class EvalConfig:
    hit_ks: tuple[int, ...] = (1, 5)
    overlap_ratios: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    interpolated_ap: bool = False

    def __post_init__(self):
        if not self.hit_ks or any(k < 1 for k in self.hit_ks):
            raise ValidationError("hit_ks must be positive integers")
        if not self.overlap_ratios or any(not (0.0 < r <= 1.0) for r in self.overlap_ratios):
            raise ValidationError("overlap ratios must lie in (0, 1]")


def hit_at_k(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose true label is among the k top-scored labels.

    Score ties rank the lower label index first, so top-k is deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValidationError(f"need a nonempty (videos, labels) score matrix, got {scores.shape}")
    if labels.shape != (scores.shape[0],):
        raise ValidationError("one true label per score row required")
    if not (1 <= k <= scores.shape[1]):
        raise ValidationError(f"k={k} outside [1, {scores.shape[1]}]")
    top = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return float(np.mean(np.any(top == labels[:, None], axis=1)))


def _ranked(detections: Sequence[Detection]) -> list[Detection]:
    return sorted(detections, key=lambda d: (-d.score, d.video_id, d.interval.start))


def average_precision(detections: Sequence[Detection],
                      ground_truth: Mapping[str, Sequence[Interval]], ratio: float,
                      interpolated: bool = False) -> float:
    """AP for one label; ground truth maps video id -> its true segments."""
    total_gt = sum(len(segs) for segs in ground_truth.values())
    if total_gt == 0:
        raise ValidationError("undefined AP: no ground-truth segments for this label")
    matched = {vid: np.zeros(len(segs), dtype=bool) for vid, segs in ground_truth.items()}
    is_tp = np.zeros(len(detections), dtype=bool)
    for rank, det in enumerate(_ranked(detections)):
        segments = ground_truth.get(det.video_id, ())
        best_index, best_iou = -1, ratio
        for index, segment in enumerate(segments):
            if matched[det.video_id][index]:
                continue
            iou = temporal_iou(det.interval, segment)
            if iou > best_iou:
                best_index, best_iou = index, iou
        if best_index >= 0:
            matched[det.video_id][best_index] = True
            is_tp[rank] = True
    if not len(detections):
        return 0.0
    tp_cum = np.cumsum(is_tp)
    precision = tp_cum / np.arange(1, len(detections) + 1)
    if interpolated:
        precision = np.maximum.accumulate(precision[::-1])[::-1]
    return float(precision[is_tp].sum() / total_gt)


def mean_ap(detections_by_label: Mapping[int, Sequence[Detection]],
            ground_truth_by_label: Mapping[int, Mapping[str, Sequence[Interval]]],
            ratio: float, interpolated: bool = False) -> float:
    """Unweighted mean AP over labels that have at least one ground-truth segment."""
    labels = [label for label, gt in ground_truth_by_label.items()
              if sum(len(segs) for segs in gt.values()) > 0]
    if not labels:
        raise ValidationError("mean AP needs at least one label with ground truth")
    aps = [average_precision(detections_by_label.get(label, ()), ground_truth_by_label[label],
                             ratio, interpolated) for label in labels]
    return float(np.mean(aps))


def ground_truth_by_label(videos: Sequence[VideoSequence]) -> dict[int, dict[str, list[Interval]]]:
    """Group the gt_segments of annotated videos by their video-level label."""
    grouped: dict[int, dict[str, list[Interval]]] = {}
    for video in videos:
        if video.gt_segments:
            grouped.setdefault(video.label, {})[video.id] = list(video.gt_segments)
    return grouped


def detections_by_label(detections: Sequence[Detection]) -> dict[int, list[Detection]]:
    grouped: dict[int, list[Detection]] = {}
    for det in detections:
        grouped.setdefault(det.label, []).append(det)
    return grouped


def max_pooled_scores(detections: Sequence[Detection], videos: Sequence[VideoSequence],
                      num_labels: int) -> np.ndarray:
    """Fallback video-level scores: the best detection score per (video, label).

    Used when average-fusion scores were not saved alongside the detections;
    videos without any detection for a label keep score 0.
    """
    index = {video.id: row for row, video in enumerate(videos)}
    scores = np.zeros((len(videos), num_labels))
    for det in detections:
        row = index[det.video_id]
        scores[row, det.label] = max(scores[row, det.label], det.score)
    return scores


def evaluate(detections: Sequence[Detection], videos: Sequence[VideoSequence],
             config: EvalConfig, num_labels: int,
             video_scores: Mapping[str, np.ndarray] | None = None) -> dict:
    """Full report: Hit@k over videos plus mAP and per-label AP at each ratio."""
    if not videos:
        raise ValidationError("evaluation needs a nonempty video set")
    known = {video.id for video in videos}
    for det in detections:
        if det.video_id not in known:
            raise ValidationError(f"detection references unknown video id {det.video_id!r}")

    if video_scores is not None:
        missing = [v.id for v in videos if v.id not in video_scores]
        if missing:
            raise ValidationError(f"missing classification scores for videos: {missing[:5]}")
        scores = np.stack([np.asarray(video_scores[v.id], dtype=np.float64) for v in videos])
        if scores.shape != (len(videos), num_labels):
            raise ValidationError(f"classification scores must be ({len(videos)}, {num_labels})")
    else:
        scores = max_pooled_scores(detections, videos, num_labels)
    labels = np.asarray([video.label for video in videos])

    report: dict = {"hit_at": {}, "map_at": {}, "per_label_ap": {}}
    for k in config.hit_ks:
        report["hit_at"][str(k)] = hit_at_k(scores, labels, k)

    gt = ground_truth_by_label(videos)
    dets = detections_by_label(detections)
    per_label: dict[str, dict[str, float]] = {str(label): {} for label in sorted(gt)}
    for ratio in config.overlap_ratios:
        aps = {label: average_precision(dets.get(label, ()), gt[label], ratio,
                                        config.interpolated_ap)
               for label in sorted(gt)}
        report["map_at"][_ratio_key(ratio)] = float(np.mean(list(aps.values()))) if aps else 0.0
        for label, ap in aps.items():
            per_label[str(label)][_ratio_key(ratio)] = ap
    report["per_label_ap"] = per_label
    return report


def _ratio_key(ratio: float) -> str:
    return format(ratio, "g")


def format_report_table(report: dict) -> str:
    """Plain-text rendering of a report, one metric per line."""
    lines = ["metric      value"]
    for k, value in report["hit_at"].items():
        lines.append(f"hit@{k:<7} {value:.4f}")
    for ratio, value in report["map_at"].items():
        lines.append(f"mAP@{ratio:<7} {value:.4f}")
    return "\n".join(lines)
