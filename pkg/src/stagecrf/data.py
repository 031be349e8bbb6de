"""Synthetic monotone-stage videos and the JSONL dataset format.

Each video is a non-decreasing sequence of stage labels plus one feature
vector per frame. Stage dwell times are geometric with means shrinking by a
fixed decay factor for later stages, scaled so the expected video length hits
the configured mean. Features are a noisy copy of a per-stage embedding, with
a controllable chance of sampling an adjacent stage's embedding instead (the
"looks like the neighbouring stage" failure mode the chain decoder is there
to clean up).

On disk a dataset is JSON Lines, one video per line:
    {"id": "video_0007", "labels": [1, 1, 2, ...], "features": [[...], ...]}
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class StageSequence:
    """One labeled video: 1-based stage labels and (T, D) features."""

    id: str
    labels: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.labels.ndim != 1 or self.features.ndim != 2:
            raise ValueError("labels must be 1-D and features 2-D")
        T = self.labels.shape[0]
        if T < 2:
            raise ValueError(f"video {self.id}: need at least two frames, got {T}")
        if self.features.shape[0] != T:
            raise ValueError(
                f"video {self.id}: {T} labels but {self.features.shape[0]} feature rows"
            )
        if self.labels.min() < 1:
            raise ValueError(f"video {self.id}: labels must be 1-based positive")
        if (np.diff(self.labels) < 0).any():
            raise ValueError(f"video {self.id}: labels must be non-decreasing")
        if not np.isfinite(self.features).all():
            raise ValueError(f"video {self.id}: features contain non-finite entries")

    @property
    def num_frames(self):
        return self.labels.shape[0]


@dataclass
class SynthConfig:
    num_videos: int
    num_classes: int = 11
    feature_dim: int = 16
    mean_length: float = 325.0
    duration_decay: float = 0.8
    noise_sigma: float = 0.2
    confusion_rate: float = 0.2
    ordinal_drift: float = 0.7
    event_strength: float = 1.0
    seed: int = 0
    dwell_means: list = field(default=None)

    def __post_init__(self):
        if self.num_videos < 1:
            raise ValueError("num_videos must be positive")
        if self.num_classes < 2:
            raise ValueError("need at least two stages")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.mean_length < self.num_classes:
            raise ValueError("mean_length must allow at least one frame per stage")
        if not 0.0 < self.duration_decay <= 1.0:
            raise ValueError("duration_decay must be in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.confusion_rate < 1.0:
            raise ValueError("confusion_rate must be in [0, 1)")
        if not 0.0 <= self.ordinal_drift <= 1.0:
            raise ValueError("ordinal_drift must be in [0, 1]")
        if self.event_strength < 0:
            raise ValueError("event_strength must be non-negative")
        if self.dwell_means is not None and len(self.dwell_means) != self.num_classes:
            raise ValueError("dwell_means must list one mean per stage")


PRESETS = {
    "human": dict(num_classes=11, mean_length=325.0),
    "mouse": dict(num_classes=8, mean_length=314.0),
}


def preset_config(name, num_videos, **overrides):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[name])
    kwargs.update(overrides)
    return SynthConfig(num_videos=num_videos, **kwargs)


def stage_dwell_means(config):
    """Expected frames per stage: decaying geometrically, scaled to mean_length.

    Later stages get shorter dwells (decay < 1 front-loads early stages). Each
    mean is clamped to at least one frame, so the scaled sum can come out
    slightly above mean_length for aggressive decay.
    """
    if config.dwell_means is not None:
        means = np.asarray(config.dwell_means, dtype=np.float64)
        if (means < 1).any():
            raise ValueError("dwell means must be at least one frame")
        return means
    raw = config.duration_decay ** np.arange(config.num_classes)
    means = raw * (config.mean_length / raw.sum())
    return np.maximum(means, 1.0)


def _sample_video(vid, config, embeddings, event_vec, means, rng):
    dwells = np.maximum(rng.geometric(1.0 / means), 1)
    labels = np.repeat(np.arange(1, config.num_classes + 1), dwells)
    T = labels.shape[0]
    pick = labels - 1
    if config.confusion_rate > 0:
        flip = rng.random(T) < config.confusion_rate
        delta = np.where(rng.random(T) < 0.5, -1, 1)
        # step off the ends of the stage range flips direction instead
        neighbour = pick + delta
        neighbour = np.where(neighbour < 0, pick + 1, neighbour)
        neighbour = np.where(neighbour >= config.num_classes, pick - 1, neighbour)
        pick = np.where(flip, neighbour, pick)
    features = embeddings[pick] + rng.normal(0.0, config.noise_sigma, (T, config.feature_dim))
    if config.event_strength > 0:
        # the frame where a new stage begins shows the transition event
        # itself; the marker carries no stage identity
        starts = np.where(np.diff(labels) != 0)[0] + 1
        features[starts] += config.event_strength * event_vec
    return StageSequence(id=vid, labels=labels, features=features)


def stage_embeddings(config, rng):
    """Unit-norm embedding per stage, laid out as a drifted random walk.

    Each stage steps from the previous one along a mix of a shared ordering
    axis (weight = ordinal_drift) and a fresh random direction. The shared
    component is what makes a stage change look the same whichever stages it
    joins; a per-pair change detector has nothing to latch onto without it.
    """
    C, D = config.num_classes, config.feature_dim
    axis = rng.normal(size=D)
    axis /= np.linalg.norm(axis)
    randoms = rng.normal(size=(C, D))
    randoms /= np.linalg.norm(randoms, axis=1, keepdims=True)
    drift = config.ordinal_drift
    embeddings = np.empty((C, D))
    embeddings[0] = randoms[0]
    for s in range(1, C):
        step = drift * axis + np.sqrt(1.0 - drift**2) * randoms[s]
        raw = embeddings[s - 1] + 0.8 * step
        embeddings[s] = raw / np.linalg.norm(raw)
    return embeddings


def generate(config):
    """Deterministic dataset for a config: same seed, same videos."""
    children = np.random.SeedSequence(config.seed).spawn(config.num_videos + 1)
    emb_rng = np.random.default_rng(children[0])
    embeddings = stage_embeddings(config, emb_rng)
    event_vec = emb_rng.normal(size=config.feature_dim)
    event_vec /= np.linalg.norm(event_vec)
    means = stage_dwell_means(config)
    videos = []
    for i in range(config.num_videos):
        rng = np.random.default_rng(children[i + 1])
        videos.append(_sample_video(f"video_{i:04d}", config, embeddings, event_vec, means, rng))
    return videos


def split(videos, fractions=(0.8, 0.1, 0.1), seed=0):
    """Shuffle once and cut into len(fractions) parts.

    Fractions must sum to 1. Sizes are rounded cumulative cuts; a nonzero
    fraction that rounds to an empty part is an error (the caller asked for
    data that cannot be delivered).
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if (fractions < 0).any() or abs(fractions.sum() - 1.0) > 1e-9:
        raise ValueError("fractions must be non-negative and sum to 1")
    order = np.random.default_rng(seed).permutation(len(videos))
    bounds = np.round(np.cumsum(fractions) * len(videos)).astype(int)
    parts, start = [], 0
    for frac, stop in zip(fractions, bounds):
        part = [videos[j] for j in order[start:stop]]
        if frac > 0 and not part:
            raise ValueError(
                f"split fraction {frac} of {len(videos)} videos rounds to zero"
            )
        parts.append(part)
        start = stop
    return parts


def save_jsonl(path, videos):
    with open(path, "w", encoding="utf-8") as fh:
        for v in videos:
            json.dump(
                {"id": v.id, "labels": v.labels.tolist(), "features": v.features.tolist()},
                fh,
            )
            fh.write("\n")


def load_jsonl(path):
    """Read a dataset, validating shape and label structure per video."""
    videos = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            for key in ("id", "labels", "features"):
                if key not in doc:
                    raise DataError(f"{path}:{lineno}: missing field {key!r}")
            try:
                video = StageSequence(
                    id=str(doc["id"]), labels=doc["labels"], features=doc["features"]
                )
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if dim is None:
                dim = video.features.shape[1]
            elif video.features.shape[1] != dim:
                raise DataError(
                    f"{path}:{lineno}: video {video.id} has feature dim "
                    f"{video.features.shape[1]}, expected {dim}"
                )
            videos.append(video)
    return videos
