"""Domain types and JSON Lines (de)serialization for corpora.

A corpus holds a web-image pool with noisy action labels plus weakly-labeled
video sequences split into train / validation / test. Frames and images are
opaque fixed-dimension float64 feature vectors; one video step is one sampled
frame. Labels are integer indices in ``[0, num_labels)``.

File format (one JSON object per line):

    {"format": "laf-corpus", "version": 1, "num_labels": N, "feature_dim": d}
    {"kind": "image", "id": ..., "label": ..., "feature": "<base64 f64le>"[, "relevant": bool]}
    {"kind": "video", "split": "train|validation|test", "id": ..., "label": ...,
     "frames": ["<base64 f64le>", ...][, "gt_segments": [[s, e], ...]][, "laf_weights": [...]]}

Feature values are base64-encoded IEEE-754 64-bit little-endian arrays, so a
save/load round trip is bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import CorpusFormatError, ValidationError
from .ioutil import atomic_write_text, decode_f64, encode_f64

CORPUS_FORMAT = "laf-corpus"
CORPUS_VERSION = 1
SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class Interval:
    """Half-open step interval [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValidationError(f"invalid interval [{self.start}, {self.end}): need 0 <= start < end")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class WebImage:
    """One web image: an id, a (possibly wrong) action label, and a feature.

    ``relevant`` is the ground-truth relevance flag carried only by synthetic
    corpora so filtering quality can be measured.
    """

    id: str
    label: int
    feature: np.ndarray
    relevant: bool | None = None


@dataclass(frozen=True, eq=False)
class VideoSequence:
    """One video: a (T, d) frame-feature matrix with a single video-level label.

    ``gt_segments`` are ground-truth action intervals (evaluation / synthetic
    corpora only). ``laf_weights`` are per-step loss weights in [0, 1] filled
    in by the domain-transfer stage.
    """

    id: str
    label: int
    frames: np.ndarray
    gt_segments: tuple[Interval, ...] | None = None
    laf_weights: np.ndarray | None = None

    @property
    def num_steps(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True, eq=False)
class Corpus:
    num_labels: int
    feature_dim: int
    images: tuple[WebImage, ...]
    train_videos: tuple[VideoSequence, ...]
    validation_videos: tuple[VideoSequence, ...]
    test_videos: tuple[VideoSequence, ...]

    @property
    def all_videos(self) -> tuple[VideoSequence, ...]:
        return self.train_videos + self.validation_videos + self.test_videos


def _check_feature(arr: np.ndarray, dim: int, where: str) -> np.ndarray:
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValidationError(f"{where}: feature dimension {arr.shape[-1] if arr.ndim else 0} != corpus feature_dim {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}: feature contains non-finite values")
    return arr


def _check_label(label, num_labels: int, where: str) -> int:
    if not isinstance(label, int) or isinstance(label, bool) or not (0 <= label < num_labels):
        raise ValidationError(f"{where}: label {label!r} outside [0, {num_labels})")
    return label


def validate_corpus(corpus: Corpus) -> None:
    """Check every type invariant, naming the offending record on failure."""
    if corpus.num_labels < 1:
        raise ValidationError("corpus must declare num_labels >= 1")
    if corpus.feature_dim < 1:
        raise ValidationError("corpus must declare feature_dim >= 1")
    for img in corpus.images:
        where = f"image {img.id!r}"
        _check_label(int(img.label), corpus.num_labels, where)
        _check_feature(np.asarray(img.feature), corpus.feature_dim, where)
    for split in SPLITS:
        for vid in getattr(corpus, f"{split}_videos"):
            where = f"video {vid.id!r}"
            _check_label(int(vid.label), corpus.num_labels, where)
            frames = np.asarray(vid.frames)
            if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] != corpus.feature_dim:
                raise ValidationError(f"{where}: frames must be a (T>=1, {corpus.feature_dim}) matrix, got {frames.shape}")
            if not np.all(np.isfinite(frames)):
                raise ValidationError(f"{where}: frames contain non-finite values")
            steps = frames.shape[0]
            if vid.gt_segments is not None:
                for seg in vid.gt_segments:
                    if seg.end > steps:
                        raise ValidationError(f"{where}: gt segment [{seg.start}, {seg.end}) exceeds {steps} steps")
            if vid.laf_weights is not None:
                w = np.asarray(vid.laf_weights)
                if w.shape != (steps,):
                    raise ValidationError(f"{where}: laf_weights length {w.shape} != {steps} steps")
                if not np.all(np.isfinite(w)) or w.min() < 0.0 or w.max() > 1.0:
                    raise ValidationError(f"{where}: laf_weights must lie in [0, 1]")


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.base is None and out.flags.owndata:
        out.setflags(write=False)
    return out


def _parse_image(rec: dict, num_labels: int, dim: int, where: str) -> WebImage:
    for key in ("id", "label", "feature"):
        if key not in rec:
            raise CorpusFormatError(f"{where}: image record missing {key!r}")
    label = _check_label(rec["label"], num_labels, where)
    feature = _check_feature(decode_f64(rec["feature"], where), dim, where)
    relevant = rec.get("relevant")
    if relevant is not None and not isinstance(relevant, bool):
        raise CorpusFormatError(f"{where}: 'relevant' must be a boolean")
    return WebImage(id=str(rec["id"]), label=label, feature=feature, relevant=relevant)


def _parse_video(rec: dict, num_labels: int, dim: int, where: str) -> tuple[str, VideoSequence]:
    for key in ("split", "id", "label", "frames"):
        if key not in rec:
            raise CorpusFormatError(f"{where}: video record missing {key!r}")
    split = rec["split"]
    if split not in SPLITS:
        raise CorpusFormatError(f"{where}: unknown split {split!r}")
    label = _check_label(rec["label"], num_labels, where)
    raw_frames = rec["frames"]
    if not isinstance(raw_frames, list) or len(raw_frames) < 1:
        raise ValidationError(f"{where}: video must have at least one frame")
    frames = np.stack([_check_feature(decode_f64(f, where), dim, where) for f in raw_frames])
    steps = frames.shape[0]

    gt_segments = None
    if "gt_segments" in rec:
        segs = []
        for pair in rec["gt_segments"]:
            if not (isinstance(pair, list) and len(pair) == 2):
                raise CorpusFormatError(f"{where}: gt segment must be a [start, end] pair")
            try:
                seg = Interval(int(pair[0]), int(pair[1]))
            except ValidationError as exc:
                raise ValidationError(f"{where}: {exc}") from exc
            if seg.end > steps:
                raise ValidationError(f"{where}: gt segment [{seg.start}, {seg.end}) exceeds {steps} steps")
            segs.append(seg)
        gt_segments = tuple(segs)

    laf_weights = None
    if "laf_weights" in rec:
        w = np.asarray(rec["laf_weights"], dtype=np.float64)
        if w.shape != (steps,):
            raise ValidationError(f"{where}: laf_weights length {w.size} != {steps} steps")
        if not np.all(np.isfinite(w)) or (w.size and (w.min() < 0.0 or w.max() > 1.0)):
            raise ValidationError(f"{where}: laf_weights must lie in [0, 1]")
        laf_weights = _freeze(w)

    video = VideoSequence(id=str(rec["id"]), label=label, frames=_freeze(frames),
                          gt_segments=gt_segments, laf_weights=laf_weights)
    return split, video


def load_corpus(path: str | Path) -> Corpus:
    """Parse a corpus file; raises with the offending line number on bad input."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    numbered = [(n, ln) for n, ln in enumerate(lines, start=1) if ln.strip()]
    if not numbered:
        raise ValidationError(f"{path}: no records")

    header_no, header_line = numbered[0]
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {header_no}: invalid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != CORPUS_FORMAT:
        raise CorpusFormatError(f"line {header_no}: expected header with format={CORPUS_FORMAT!r}")
    if header.get("version") != CORPUS_VERSION:
        raise CorpusFormatError(f"line {header_no}: unsupported corpus version {header.get('version')!r}")
    try:
        num_labels = int(header["num_labels"])
        feature_dim = int(header["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"line {header_no}: header needs integer num_labels and feature_dim") from exc
    if num_labels < 1 or feature_dim < 1:
        raise ValidationError(f"line {header_no}: num_labels and feature_dim must be >= 1")

    images: list[WebImage] = []
    videos: dict[str, list[VideoSequence]] = {split: [] for split in SPLITS}
    for line_no, line in numbered[1:]:
        where = f"line {line_no}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{where}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise CorpusFormatError(f"{where}: record must be a JSON object")
        kind = rec.get("kind")
        if kind == "image":
            images.append(_parse_image(rec, num_labels, feature_dim, where))
        elif kind == "video":
            split, video = _parse_video(rec, num_labels, feature_dim, where)
            videos[split].append(video)
        else:
            raise CorpusFormatError(f"{where}: unknown record kind {kind!r}")

    return Corpus(num_labels=num_labels, feature_dim=feature_dim, images=tuple(images),
                  train_videos=tuple(videos["train"]), validation_videos=tuple(videos["validation"]),
                  test_videos=tuple(videos["test"]))


def _image_record(img: WebImage) -> dict:
    rec = {"kind": "image", "id": img.id, "label": int(img.label), "feature": encode_f64(img.feature)}
    if img.relevant is not None:
        rec["relevant"] = bool(img.relevant)
    return rec


def _video_record(vid: VideoSequence, split: str) -> dict:
    rec = {
        "kind": "video",
        "split": split,
        "id": vid.id,
        "label": int(vid.label),
        "frames": [encode_f64(frame) for frame in vid.frames],
    }
    if vid.gt_segments is not None:
        rec["gt_segments"] = [[seg.start, seg.end] for seg in vid.gt_segments]
    if vid.laf_weights is not None:
        rec["laf_weights"] = [float(w) for w in vid.laf_weights]
    return rec


def corpus_lines(corpus: Corpus) -> Iterable[str]:
    dump = lambda obj: json.dumps(obj, separators=(",", ":"))
    yield dump({"format": CORPUS_FORMAT, "version": CORPUS_VERSION,
                "num_labels": corpus.num_labels, "feature_dim": corpus.feature_dim})
    for img in corpus.images:
        yield dump(_image_record(img))
    for split in SPLITS:
        for vid in getattr(corpus, f"{split}_videos"):
            yield dump(_video_record(vid, split))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus atomically; round-trips bit-exactly through load_corpus."""
    validate_corpus(corpus)
    atomic_write_text(path, "\n".join(corpus_lines(corpus)) + "\n")


def with_laf_weights(corpus: Corpus, weights: dict[str, np.ndarray]) -> Corpus:
    """Return a copy of the corpus with laf_weights set on every train video."""
    missing = [v.id for v in corpus.train_videos if v.id not in weights]
    if missing:
        raise ValidationError(f"missing LAF weights for train videos: {missing[:5]}")
    train = tuple(dataclasses.replace(v, laf_weights=np.asarray(weights[v.id], dtype=np.float64))
                  for v in corpus.train_videos)
    return dataclasses.replace(corpus, train_videos=train)
