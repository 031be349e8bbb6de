"""Joint training of both heads against the chain likelihood.

The objective is a weighted sum of three terms: the chain's negative log
likelihood (per frame), a per-frame cross-entropy on the image head alone,
and a per-step binary cross-entropy on the change head against the
did-the-stage-change indicator. The two head losses keep each stream honest
even when the chain could lean on the other one.

Each optimization step draws a few videos, keeps a sorted random subset of
frames from each (long videos would otherwise dominate the gradient), and
applies one Adam update from the batch-mean gradient. Everything downstream
of the seed is deterministic: same data, same config, same parameters out.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import crf, potentials
from .data import StageSequence
from .errors import NumericError

LOG_FLOOR = 1e-12
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-4
    batch_size: int = 4
    frames_per_video: int = 50
    seed: int = 0
    loss_weights: tuple = (1.0, 1.0, 1.0)
    patience: int = 10
    feature_jitter: float = 0.0
    val_decode_mode: str = "crf"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        # rate 0 is allowed: a no-op run is a useful determinism probe
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.frames_per_video < 2:
            raise ValueError("frames_per_video must be at least 2")
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if len(self.loss_weights) != 3:
            raise ValueError("loss_weights needs exactly three values")
        if any(w < 0 for w in self.loss_weights):
            raise ValueError("loss_weights must be non-negative")
        if self.feature_jitter < 0:
            raise ValueError("feature_jitter must be non-negative")
        if self.val_decode_mode not in ("argmax", "dp-unary", "crf"):
            raise ValueError(f"unknown decode mode {self.val_decode_mode!r}")


@dataclass
class TrainState:
    model: potentials.TwoStreamModel
    first_moment: dict
    second_moment: dict
    step: int
    rng: np.random.Generator

    @classmethod
    def fresh(cls, model, rng):
        zeros = lambda: {k: np.zeros_like(v) for k, v in model.params().items()}
        return cls(model=model, first_moment=zeros(), second_moment=zeros(), step=0, rng=rng)


def image_loss(unary, gold_labels):
    """Mean cross-entropy of the image head at the gold stages (1-based)."""
    unary = np.asarray(unary, dtype=np.float64)
    gold = np.asarray(gold_labels, dtype=np.int64) - 1
    picked = unary[np.arange(unary.shape[0]), gold]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).mean())


def transition_loss(change_probs, gold_labels):
    """Mean binary cross-entropy of the change head against label changes."""
    change_probs = np.asarray(change_probs, dtype=np.float64)
    gold = np.asarray(gold_labels, dtype=np.int64)
    target = (np.diff(gold) != 0).astype(np.int64)
    picked = change_probs[np.arange(target.shape[0]), target]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).mean())


def _ce_prob_gradient(picked, rows, cols, shape):
    """Gradient of a mean floored cross-entropy w.r.t. the probability table."""
    grad = np.zeros(shape)
    live = picked > LOG_FLOOR
    grad[rows[live], cols[live]] = -1.0 / (picked[live] * rows.shape[0])
    return grad


def total_loss(features, gold_labels, model, weights=(1.0, 1.0, 1.0)):
    """Weighted objective for one sequence, plus gradients for every parameter.

    Returns (value, grads) with grads keyed like ``model.params()``. The chain
    NLL is averaged over frames so the weights mean the same thing whatever
    the sampled length.
    """
    features = np.asarray(features, dtype=np.float64)
    gold = np.asarray(gold_labels, dtype=np.int64)
    w_nll, w_image, w_change = weights
    T = features.shape[0]
    C = model.num_classes

    unary = potentials.unary_potentials(features, model)
    change = potentials.transition_probs(features, model)
    pairwise, mask = potentials.assemble_pairwise(change, C)
    pot = crf.PotentialTable(unary, pairwise, mask)

    inference = crf.marginals(pot)
    nll = crf.nll(pot, gold, inference=inference) / T
    unary_grad, pairwise_grad = crf.nll_gradient(pot, gold, inference=inference)

    rows = np.arange(T)
    gold0 = gold - 1
    picked_u = unary[rows, gold0]
    loss_i = float(-np.log(np.maximum(picked_u, LOG_FLOOR)).mean())

    steps = np.arange(T - 1)
    target = (np.diff(gold) != 0).astype(np.int64)
    picked_c = change[steps, target]
    loss_m = float(-np.log(np.maximum(picked_c, LOG_FLOOR)).mean())

    value = w_nll * nll + w_image * loss_i + w_change * loss_m

    grad_unary = (w_nll / T) * unary_grad
    grad_unary += w_image * _ce_prob_gradient(picked_u, rows, gold0, unary.shape)

    # collapse the pairwise gradient back onto the two change-head outputs:
    # the diagonal carries the stay probability, the strict upper triangle
    # shares the change probability
    diag = np.eye(C, dtype=bool)
    upper = mask & ~diag
    grad_change = (w_nll / T) * np.stack(
        [pairwise_grad[:, diag].sum(axis=1), pairwise_grad[:, upper].sum(axis=1)], axis=1
    )
    grad_change += w_change * _ce_prob_gradient(picked_c, steps, target, change.shape)

    gw_i, gb_i = potentials.unary_head_gradients(features, unary, grad_unary)
    gw_c, gb_c = potentials.transition_head_gradients(features, change, grad_change)
    grads = {"w_image": gw_i, "b_image": gb_i, "w_change": gw_c, "b_change": gb_c}
    return value, grads


def sample_batch(dataset, config, rng):
    """Pick videos and a sorted random frame subset from each.

    At most ``frames_per_video`` distinct frames are kept per video, in time
    order, so gold labels stay non-decreasing (jumps over skipped stages are
    fine with the monotone mask). Videos are drawn without replacement; a
    dataset smaller than the batch size just yields all of it, shuffled.
    """
    if not dataset:
        raise ValueError("cannot sample from an empty dataset")
    chosen = rng.choice(len(dataset), size=min(config.batch_size, len(dataset)), replace=False)
    batch = []
    for i in chosen:
        video = dataset[i]
        T = video.num_frames
        keep = np.sort(rng.choice(T, size=min(config.frames_per_video, T), replace=False))
        features = video.features[keep]
        if config.feature_jitter > 0:
            features = features + rng.normal(0.0, config.feature_jitter, features.shape)
        batch.append(StageSequence(id=video.id, labels=video.labels[keep], features=features))
    return batch


def adam_update(state, grads, learning_rate):
    """One step of the usual bias-corrected adaptive update, in place."""
    state.step += 1
    t = state.step
    for name, param in state.model.params().items():
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        param -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def dataset_losses(videos, model, weights):
    """Unweighted per-term means over full (unsampled) sequences."""
    nll_sum = img_sum = chg_sum = 0.0
    for video in videos:
        unary = potentials.unary_potentials(video.features, model)
        change = potentials.transition_probs(video.features, model)
        pairwise, mask = potentials.assemble_pairwise(change, model.num_classes)
        pot = crf.PotentialTable(unary, pairwise, mask)
        nll_sum += crf.nll(pot, video.labels) / video.num_frames
        img_sum += image_loss(unary, video.labels)
        chg_sum += transition_loss(change, video.labels)
    n = len(videos)
    out = {"nll": nll_sum / n, "image": img_sum / n, "change": chg_sum / n}
    out["total"] = weights[0] * out["nll"] + weights[1] * out["image"] + weights[2] * out["change"]
    return out


def _validate(model, videos, mode):
    from .metrics import evaluate

    preds = {v.id: potentials.predict_labels(model, v.features, mode=mode) for v in videos}
    return evaluate(preds, {v.id: v.labels for v in videos})


def fit(train_videos, val_videos, config, num_classes=None):
    """Train a fresh model; returns (state, per-epoch history).

    ``num_classes`` defaults to the largest label seen. Each history record
    carries end-of-epoch loss terms over the full training sequences plus
    validation accuracy when a validation split is given; the best-validation
    model is what ends up in the returned state. Without a validation split
    every epoch runs and the final parameters are returned as-is.
    """
    if not train_videos:
        raise ValueError("training split is empty")
    if num_classes is None:
        pool = list(train_videos) + list(val_videos or [])
        num_classes = max(int(v.labels.max()) for v in pool)
    feature_dim = train_videos[0].features.shape[1]

    init_seed, batch_seed = np.random.SeedSequence(config.seed).spawn(2)
    model = potentials.init_model(num_classes, feature_dim, seed=init_seed)
    state = TrainState.fresh(model, np.random.default_rng(batch_seed))

    history = []
    best_score, best_model, since_best = -math.inf, None, 0
    batches = math.ceil(len(train_videos) / config.batch_size)
    for epoch in range(1, config.epochs + 1):
        for _ in range(batches):
            batch = sample_batch(train_videos, config, state.rng)
            accum = {k: np.zeros_like(v) for k, v in state.model.params().items()}
            for video in batch:
                value, grads = total_loss(
                    video.features, video.labels, state.model, config.loss_weights
                )
                if not math.isfinite(value):
                    raise NumericError(f"non-finite loss on video {video.id}")
                for k in accum:
                    accum[k] += grads[k]
            for k in accum:
                accum[k] /= len(batch)
            adam_update(state, accum, config.learning_rate)

        record = {"epoch": epoch}
        terms = dataset_losses(train_videos, state.model, config.loss_weights)
        record["train_nll"] = terms["nll"]
        record["train_image_loss"] = terms["image"]
        record["train_change_loss"] = terms["change"]
        record["train_total"] = terms["total"]
        if val_videos:
            report = _validate(state.model, val_videos, config.val_decode_mode)
            record["val_global"] = report.global_accuracy
            record["val_mean_per_stage"] = report.mean_per_stage
            if report.global_accuracy > best_score:
                best_score, since_best = report.global_accuracy, 0
                best_model = state.model.copy()
            else:
                since_best += 1
                if config.patience > 0 and since_best >= config.patience:
                    history.append(record)
                    break
        history.append(record)

    if best_model is not None:
        state.model = best_model
    return state, history
