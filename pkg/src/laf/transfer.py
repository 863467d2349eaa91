"""Bidirectional image/frame filtering and LAF scoring.

The loop alternates two transfer directions: a classifier trained on the
current frame set prunes the web-image pool (keep an image only if the
probability of its own label exceeds theta1), then a classifier trained on
the surviving images prunes the frame set with theta2. After each round a
fresh frame-side classifier is scored on the validation videos (frame-level
probabilities averaged per video); the loop stops when that accuracy drops
below the best seen so far, or after max_iterations. The image-side
classifier from the best round becomes the LAF proposal model, and its
probability for a video's own label at every step of every training video is
that step's LAF weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .classifier import (Classifier, ClassifierTrainConfig, predict_softmax_many,
                         scores_for_labels, train_classifier)
from .corpus import Corpus, Interval, VideoSequence, WebImage
from .errors import TransferCollapseError, ValidationError


@dataclass(frozen=True)
class TransferConfig:
    theta1: float = 0.5
    theta2: float = 0.5
    max_iterations: int = 10
    frames_per_video: int = 10
    min_items_per_label: int = 1
    classifier_config: ClassifierTrainConfig = field(default_factory=ClassifierTrainConfig)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.theta1 <= 1.0 and 0.0 <= self.theta2 <= 1.0):
            raise ValidationError("thresholds must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be positive")
        if self.frames_per_video < 1:
            raise ValidationError("frames_per_video must be positive")
        if self.min_items_per_label < 0:
            raise ValidationError("min_items_per_label must be nonnegative")


class FrameItem(NamedTuple):
    """One entry of the frame set: a single labeled step of a training video."""

    video_id: str
    step: int
    label: int
    feature: np.ndarray


@dataclass(eq=False)
class TransferState:
    """Mutable loop state; pool sizes only ever shrink."""

    iteration: int
    images: list[WebImage]
    frames: list[FrameItem]
    frame_model: Classifier
    image_model: Classifier | None
    validation_history: list[float]


@dataclass(frozen=True)
class TransferIterationLog:
    iteration: int
    size_images: int
    size_frames: int
    validation_accuracy: float
    # Largest below-threshold score among removed items; None when nothing was
    # removed. Lets tests assert that filtering never discarded a passing item.
    max_removed_image_score: float | None
    max_removed_frame_score: float | None

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "size_I": self.size_images,
            "size_V": self.size_frames,
            "validation_accuracy": self.validation_accuracy,
            "max_removed_image_score": self.max_removed_image_score,
            "max_removed_frame_score": self.max_removed_frame_score,
        }


@dataclass(eq=False)
class LafResult:
    """LAF proposal model plus per-step weights for every training video."""

    proposal_model: Classifier
    laf_weights: dict[str, np.ndarray]
    log: list[TransferIterationLog]
    validation_history: list[float]
    image_pool: tuple[WebImage, ...]  # images the proposal model was trained on


def initialize_frame_set(train_videos: Sequence[VideoSequence], frames_per_video: int,
                         seed: int) -> list[FrameItem]:
    """Random initial frame sample: per video, that many distinct steps (or all)."""
    if not train_videos:
        raise ValidationError("cannot initialize a frame set from zero videos")
    if frames_per_video < 1:
        raise ValidationError("frames_per_video must be positive")
    rng = np.random.default_rng(seed)
    items: list[FrameItem] = []
    for video in train_videos:
        count = min(frames_per_video, video.num_steps)
        steps = np.sort(rng.choice(video.num_steps, size=count, replace=False))
        items.extend(FrameItem(video.id, int(s), video.label, video.frames[s]) for s in steps)
    return items


def filter_scores(features: np.ndarray, labels: np.ndarray, clf: Classifier, theta: float,
                  min_items_per_label: int) -> tuple[np.ndarray, np.ndarray]:
    """Keep mask + own-label scores for the threshold filter with a per-label floor.

    An item survives iff its score strictly exceeds theta. If that would leave
    a label with fewer than ``min_items_per_label`` survivors, the label's
    top-scoring ``min_items_per_label`` items are retained instead.
    """
    labels = np.asarray(labels)
    scores = scores_for_labels(clf, features, labels)
    keep = scores > theta
    if min_items_per_label > 0:
        for label in np.unique(labels):
            members = np.flatnonzero(labels == label)
            if keep[members].sum() < min_items_per_label:
                keep[members] = False
                best = members[np.argsort(-scores[members], kind="stable")]
                keep[best[:min_items_per_label]] = True
    return keep, scores


def filter_items(items: Sequence[tuple[np.ndarray, int]], clf: Classifier, theta: float,
                 min_items_per_label: int = 0) -> list[tuple[np.ndarray, int]]:
    """Threshold-filter (feature, label) pairs, preserving their order."""
    if not items:
        return []
    features = np.stack([np.asarray(f, dtype=np.float64) for f, _ in items])
    labels = np.asarray([lab for _, lab in items])
    keep, _ = filter_scores(features, labels, clf, theta, min_items_per_label)
    return [item for item, kept in zip(items, keep) if kept]


def validation_accuracy(clf: Classifier, validation_videos: Sequence[VideoSequence]) -> float:
    """Video accuracy under frame-probability averaging; argmax ties go to the lowest label."""
    if not validation_videos:
        raise ValidationError("validation accuracy needs a nonempty video set")
    correct = 0
    for video in validation_videos:
        fused = predict_softmax_many(clf, video.frames).mean(axis=0)
        if int(np.argmax(fused)) == video.label:
            correct += 1
    return correct / len(validation_videos)


def laf_scores_for_video(proposal_model: Classifier, video: VideoSequence) -> np.ndarray:
    """Per-step weights: the model's probability for the video's own label."""
    return predict_softmax_many(proposal_model, video.frames)[:, video.label]


def shot_laf_scores(step_weights: np.ndarray, shots: Sequence[Interval]) -> np.ndarray:
    """Average step weights within each shot; shots must tile [0, T) in order."""
    step_weights = np.asarray(step_weights, dtype=np.float64)
    total = step_weights.shape[0]
    expected_start = 0
    for shot in shots:
        if shot.start != expected_start:
            raise ValidationError(f"shots must tile [0, {total}) without gaps or overlap; "
                                  f"got start {shot.start}, expected {expected_start}")
        expected_start = shot.end
    if expected_start != total:
        raise ValidationError(f"shots cover [0, {expected_start}) but the video has {total} steps")
    return np.array([step_weights[s.start:s.end].mean() for s in shots])


def _train_on(pairs_features: np.ndarray, pairs_labels: np.ndarray, num_labels: int,
              config: ClassifierTrainConfig) -> Classifier:
    examples = list(zip(pairs_features, (int(l) for l in pairs_labels)))
    return train_classifier(examples, num_labels, config)


def _max_removed(scores: np.ndarray, keep: np.ndarray) -> float | None:
    removed = scores[~keep]
    return float(removed.max()) if removed.size else None


def run_domain_transfer(corpus: Corpus, config: TransferConfig) -> LafResult:
    """Run the filtering loop and score all training steps with the best model."""
    if not corpus.images:
        raise ValidationError("domain transfer needs a nonempty image pool")
    if not corpus.train_videos:
        raise ValidationError("domain transfer needs training videos")
    if not corpus.validation_videos:
        raise ValidationError("domain transfer needs a validation split")

    frames = initialize_frame_set(corpus.train_videos, config.frames_per_video, config.seed)
    frame_features = np.stack([item.feature for item in frames])
    frame_labels = np.asarray([item.label for item in frames])
    state = TransferState(
        iteration=0,
        images=list(corpus.images),
        frames=frames,
        frame_model=_train_on(frame_features, frame_labels, corpus.num_labels,
                              config.classifier_config),
        image_model=None,
        validation_history=[],
    )

    log: list[TransferIterationLog] = []
    best_accuracy = -np.inf
    best_model: Classifier | None = None
    best_pool: tuple[WebImage, ...] = ()

    for iteration in range(1, config.max_iterations + 1):
        state.iteration = iteration

        # Frames -> images: prune the web pool with the frame-trained model.
        image_features = np.stack([img.feature for img in state.images])
        image_labels = np.asarray([img.label for img in state.images])
        keep, scores = filter_scores(image_features, image_labels, state.frame_model,
                                     config.theta1, config.min_items_per_label)
        max_removed_image = _max_removed(scores, keep)
        state.images = [img for img, kept in zip(state.images, keep) if kept]
        if not state.images:
            raise TransferCollapseError(f"transfer collapsed: image pool empty at iteration {iteration}")
        image_features, image_labels = image_features[keep], image_labels[keep]
        state.image_model = _train_on(image_features, image_labels, corpus.num_labels,
                                      config.classifier_config)

        # Images -> frames: prune the frame set with the image-trained model.
        frame_features_all = np.stack([item.feature for item in state.frames])
        frame_labels_all = np.asarray([item.label for item in state.frames])
        keep, scores = filter_scores(frame_features_all, frame_labels_all, state.image_model,
                                     config.theta2, config.min_items_per_label)
        max_removed_frame = _max_removed(scores, keep)
        state.frames = [item for item, kept in zip(state.frames, keep) if kept]
        if not state.frames:
            raise TransferCollapseError(f"transfer collapsed: frame set empty at iteration {iteration}")

        # Retrain on the pruned frames: next round's filter and this round's
        # validation model.
        frame_features = frame_features_all[keep]
        frame_labels = frame_labels_all[keep]
        state.frame_model = _train_on(frame_features, frame_labels, corpus.num_labels,
                                      config.classifier_config)
        accuracy = validation_accuracy(state.frame_model, corpus.validation_videos)
        state.validation_history.append(accuracy)
        log.append(TransferIterationLog(
            iteration=iteration,
            size_images=len(state.images),
            size_frames=len(state.frames),
            validation_accuracy=accuracy,
            max_removed_image_score=max_removed_image,
            max_removed_frame_score=max_removed_frame,
        ))

        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_model = state.image_model
            best_pool = tuple(state.images)
        elif accuracy < best_accuracy:
            break

    assert best_model is not None
    weights = {video.id: laf_scores_for_video(best_model, video)
               for video in corpus.train_videos}
    return LafResult(proposal_model=best_model, laf_weights=weights, log=log,
                     validation_history=list(state.validation_history), image_pool=best_pool)


def transfer_log_json(log: Sequence[TransferIterationLog]) -> list[dict]:
    return [entry.to_json() for entry in log]
