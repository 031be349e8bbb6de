"""Two-stream scoring heads and potential assembly.

The image head turns one frame's feature vector into per-class probabilities
(the chain's unary scores). The change head looks at two consecutive frames'
features, concatenated, and emits a two-way probability (stay, change); those
probabilities fill the per-step transition table: the diagonal gets the stay
probability, every upward jump gets the change probability, and downward
transitions are forbidden by the monotone mask.

Feature vectors stand in for whatever upstream encoder produced them; the
learned parts here are exactly the two linear+softmax heads.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import crf
from .crf import PotentialTable, monotone_mask

SMOOTH_KERNEL = np.array([1.0, 3.0, 5.0, 3.0, 1.0]) / 13.0


@dataclass
class TwoStreamModel:
    """Parameters of both heads.

    w_image: (C, D), b_image: (C,) — image head (per-frame class scores).
    w_change: (2, 2D), b_change: (2,) — change head over concatenated
    consecutive feature vectors; output columns are (stay, change).
    """

    w_image: np.ndarray
    b_image: np.ndarray
    w_change: np.ndarray
    b_change: np.ndarray

    def __post_init__(self):
        self.w_image = np.asarray(self.w_image, dtype=np.float64)
        self.b_image = np.asarray(self.b_image, dtype=np.float64)
        self.w_change = np.asarray(self.w_change, dtype=np.float64)
        self.b_change = np.asarray(self.b_change, dtype=np.float64)
        C, D = self.w_image.shape
        if C < 1 or D < 1:
            raise ValueError("need at least one class and one feature dimension")
        if self.b_image.shape != (C,):
            raise ValueError(f"b_image must be ({C},), got {self.b_image.shape}")
        if self.w_change.shape != (2, 2 * D):
            raise ValueError(f"w_change must be (2, {2 * D}), got {self.w_change.shape}")
        if self.b_change.shape != (2,):
            raise ValueError(f"b_change must be (2,), got {self.b_change.shape}")
        for name, arr in self.params().items():
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def num_classes(self):
        return self.w_image.shape[0]

    @property
    def feature_dim(self):
        return self.w_image.shape[1]

    def params(self):
        """Parameter dict, fixed order; values are the live arrays."""
        return {
            "w_image": self.w_image,
            "b_image": self.b_image,
            "w_change": self.w_change,
            "b_change": self.b_change,
        }

    def copy(self):
        return TwoStreamModel(
            self.w_image.copy(), self.b_image.copy(), self.w_change.copy(), self.b_change.copy()
        )


def init_model(num_classes, feature_dim, seed=0):
    """Fresh model: weights uniform in ±1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    lim_i = 1.0 / np.sqrt(feature_dim)
    lim_c = 1.0 / np.sqrt(2 * feature_dim)
    return TwoStreamModel(
        w_image=rng.uniform(-lim_i, lim_i, size=(num_classes, feature_dim)),
        b_image=np.zeros(num_classes),
        w_change=rng.uniform(-lim_c, lim_c, size=(2, 2 * feature_dim)),
        b_change=np.zeros(2),
    )


def softmax(logits, axis=-1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_vjp(probs, grad_probs):
    """Backprop a gradient on softmax outputs to the logits (rows independent)."""
    inner = (grad_probs * probs).sum(axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


def _check_features(features, model):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be (T, D), got shape {features.shape}")
    if features.shape[1] != model.feature_dim:
        raise ValueError(
            f"feature dim {features.shape[1]} does not match model dim {model.feature_dim}"
        )
    if not np.isfinite(features).all():
        raise ValueError("features must be finite")
    return features


def unary_potentials(features, model):
    """(T, C) per-frame class probabilities: softmax(w_image @ f + b_image)."""
    features = _check_features(features, model)
    return softmax(features @ model.w_image.T + model.b_image)


def _paired_features(features):
    # (T-1, 2D): previous frame's features next to the current frame's
    return np.concatenate([features[:-1], features[1:]], axis=1)


def transition_probs(features, model):
    """(T-1, 2) change-head probabilities, columns (stay, change)."""
    features = _check_features(features, model)
    if features.shape[0] < 2:
        raise ValueError("need at least two frames to score transitions")
    return softmax(_paired_features(features) @ model.w_change.T + model.b_change)


def assemble_pairwise(change_probs, num_classes):
    """Per-step transition scores from change probabilities.

    Entry (t, c, c) is the stay probability, (t, c, c') for c < c' the change
    probability (every upward jump shares it); downward entries are masked.
    Returns (pairwise, mask).
    """
    if num_classes < 1:
        raise ValueError("need at least one class")
    change_probs = np.asarray(change_probs, dtype=np.float64)
    mask = monotone_mask(num_classes)
    diag = np.eye(num_classes, dtype=bool)
    pairwise = np.where(
        diag, change_probs[:, 0, None, None], change_probs[:, 1, None, None]
    )
    pairwise[:, ~mask] = 0.0
    return pairwise, mask


def smooth_unary(unary):
    """Ordinal smoothing across the class axis with weights (1,3,5,3,1)/13.

    Classes outside the range contribute zero; no renormalization afterward.
    Inference-time only: training consumes the raw rows.
    """
    unary = np.asarray(unary, dtype=np.float64)
    T, C = unary.shape
    padded = np.zeros((T, C + 4))
    padded[:, 2:-2] = unary
    out = np.zeros_like(unary)
    for k, w in enumerate(SMOOTH_KERNEL):
        out += w * padded[:, k : k + C]
    return out


def unary_head_gradients(features, probs, grad_probs):
    """Chain a gradient on unary probabilities back to (w_image, b_image)."""
    features = np.asarray(features, dtype=np.float64)
    grad_logits = softmax_vjp(probs, grad_probs)
    return grad_logits.T @ features, grad_logits.sum(axis=0)


def transition_head_gradients(features, change_probs, grad_probs):
    """Chain a gradient on change probabilities back to (w_change, b_change)."""
    features = np.asarray(features, dtype=np.float64)
    grad_logits = softmax_vjp(change_probs, grad_probs)
    return grad_logits.T @ _paired_features(features), grad_logits.sum(axis=0)


def predict_labels(model, features, mode="crf", smooth=None):
    """Decode one sequence of feature vectors into 1-based stage labels.

    mode "argmax": per-frame argmax of the unary probabilities (may be
    non-monotone). mode "dp-unary": Viterbi under the monotone mask with all
    allowed transitions scored 0. mode "crf": Viterbi over the full two-stream
    potentials. ``smooth`` defaults to off for argmax and on otherwise.
    """
    if mode not in ("argmax", "dp-unary", "crf"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if smooth is None:
        smooth = mode != "argmax"
    unary = unary_potentials(features, model)
    if smooth:
        unary = smooth_unary(unary)
    if mode == "argmax":
        return unary.argmax(axis=1) + 1
    T = unary.shape[0]
    C = model.num_classes
    if mode == "crf" and T >= 2:
        pairwise, mask = assemble_pairwise(transition_probs(features, model), C)
    else:
        pairwise, mask = np.zeros((T - 1, C, C)), monotone_mask(C)
    return crf.viterbi(PotentialTable(unary, pairwise, mask))


def save_checkpoint(path, model, smooth_decode=True):
    """Write the model to a JSON checkpoint; arrays row-major decimal doubles."""
    doc = {
        "num_classes": model.num_classes,
        "feature_dim": model.feature_dim,
        "smooth_decode": bool(smooth_decode),
        "w_image": model.w_image.tolist(),
        "b_image": model.b_image.tolist(),
        "w_change": model.w_change.tolist(),
        "b_change": model.b_change.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (model, smooth_decode)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    model = TwoStreamModel(
        w_image=np.array(doc["w_image"], dtype=np.float64).reshape(
            doc["num_classes"], doc["feature_dim"]
        ),
        b_image=np.array(doc["b_image"], dtype=np.float64),
        w_change=np.array(doc["w_change"], dtype=np.float64).reshape(
            2, 2 * doc["feature_dim"]
        ),
        b_change=np.array(doc["b_change"], dtype=np.float64),
    )
    return model, bool(doc["smooth_decode"])
