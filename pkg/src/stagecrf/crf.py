"""Exact inference and learning primitives for a masked linear-chain CRF.

The chain distribution over label sequences y (1-based, values 1..C) is

    p(y) = exp{ sum_t unary(t, y_t) + sum_{t>=2} pairwise(t-1, y_{t-1}, y_t) } / Z

restricted to sequences whose every step is allowed by the transition mask.
The first frame carries a unary term only. Unary and pairwise entries are raw
scores: any finite values are accepted, no normalization is assumed.

All operations are pure functions; tables are treated as read-only.
"""

from dataclasses import dataclass

import numpy as np

from . import dp
from .errors import ForbiddenTransitionError


def monotone_mask(num_classes):
    """Boolean (C, C) mask allowing only transitions c -> c' with c <= c'."""
    idx = np.arange(num_classes)
    return idx[:, None] <= idx[None, :]


@dataclass
class PotentialTable:
    """Scores driving one sequence.

    unary: (T, C) per-frame state scores.
    pairwise: (T-1, C, C) per-step transition scores; entry (t, c, c') scores
        the step from state c at frame t+1 to state c' at frame t+2 (1-based
        frames). Values at masked positions are ignored entirely.
    mask: (C, C) bool, True where the transition c -> c' is allowed.
    """

    unary: np.ndarray
    pairwise: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.unary = np.ascontiguousarray(self.unary, dtype=np.float64)
        self.pairwise = np.ascontiguousarray(self.pairwise, dtype=np.float64)
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        if self.unary.ndim != 2 or self.unary.shape[0] < 1 or self.unary.shape[1] < 1:
            raise ValueError(f"unary must be (T, C) with T, C >= 1, got {self.unary.shape}")
        T, C = self.unary.shape
        if self.pairwise.shape != (T - 1, C, C):
            raise ValueError(
                f"pairwise must be {(T - 1, C, C)} to match unary, got {self.pairwise.shape}"
            )
        if self.mask.shape != (C, C):
            raise ValueError(f"mask must be {(C, C)}, got {self.mask.shape}")
        if not np.isfinite(self.unary).all():
            raise ValueError("unary entries must all be finite")
        if T > 1 and not np.isfinite(self.pairwise[:, self.mask]).all():
            raise ValueError("pairwise entries at allowed positions must be finite")

    @classmethod
    def with_monotone_mask(cls, unary, pairwise):
        unary = np.asarray(unary, dtype=np.float64)
        return cls(unary, pairwise, monotone_mask(unary.shape[1]))

    @property
    def num_frames(self):
        return self.unary.shape[0]

    @property
    def num_classes(self):
        return self.unary.shape[1]


@dataclass
class CrfInference:
    """Forward-backward outputs: log Z plus exact marginals.

    unary_marginals rows sum to 1; each pairwise_marginals slice sums to 1 and
    marginalizes back to the adjacent unary rows; masked positions are exactly 0.
    """

    log_partition: float
    unary_marginals: np.ndarray
    pairwise_marginals: np.ndarray


def _gold_indices(pot, labels):
    """Validate a 1-based gold sequence against the table; return 0-based indices."""
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (pot.num_frames,):
        raise ValueError(f"gold labels must have length {pot.num_frames}, got shape {y.shape}")
    if y.min() < 1 or y.max() > pot.num_classes:
        raise ValueError(f"gold labels must lie in 1..{pot.num_classes}")
    y0 = y - 1
    if pot.num_frames > 1:
        ok = pot.mask[y0[:-1], y0[1:]]
        if not ok.all():
            t = int(np.flatnonzero(~ok)[0])
            raise ForbiddenTransitionError(
                f"gold transition {y[t]} -> {y[t + 1]} at step {t + 1} is masked"
            )
    return y0


def sequence_score(pot, labels):
    """Total potential of one allowed 1-based label sequence."""
    y0 = _gold_indices(pot, labels)
    score = pot.unary[np.arange(pot.num_frames), y0].sum()
    if pot.num_frames > 1:
        score += pot.pairwise[np.arange(pot.num_frames - 1), y0[:-1], y0[1:]].sum()
    return float(score)


def log_partition(pot):
    """log Z: log-sum of exp path scores over all mask-allowed sequences.

    O(T C^2) time via the forward recursion; never materializes Z.
    """
    _, _, value = dp.forward_pass(pot.unary, pot.pairwise, pot.mask)
    return value


def marginals(pot):
    """Exact forward-backward inference; returns a CrfInference."""
    alpha, fwd, log_z = dp.forward_pass(pot.unary, pot.pairwise, pot.mask)
    beta, bwd = dp.backward_pass(pot.unary, pot.pairwise, pot.mask)
    ok = fwd & bwd
    unary_m = np.where(ok, np.exp(np.where(ok, alpha + beta - log_z, -np.inf)), 0.0)

    T, C = pot.unary.shape
    if T > 1:
        valid = pot.mask[None, :, :] & ok[:-1, :, None] & ok[1:, None, :]
        expo = np.where(
            valid,
            alpha[:-1, :, None]
            + pot.pairwise
            + (pot.unary[1:] + beta[1:])[:, None, :]
            - log_z,
            -np.inf,
        )
        pair_m = np.where(valid, np.exp(expo), 0.0)
    else:
        pair_m = np.zeros((0, C, C))
    return CrfInference(log_z, unary_m, pair_m)


def nll(pot, gold, inference=None):
    """Negative log-likelihood of a 1-based gold sequence: log Z - score(gold).

    Pass a precomputed ``inference`` to reuse its log-partition.
    """
    score = sequence_score(pot, gold)
    log_z = inference.log_partition if inference is not None else log_partition(pot)
    return log_z - score


def nll_gradient(pot, gold, inference=None):
    """Gradient of nll in potential space.

    unary part: marginal minus gold indicator; pairwise part likewise, with
    masked positions exactly zero. Pass a precomputed ``inference`` to reuse
    a forward-backward run.
    """
    y0 = _gold_indices(pot, gold)
    if inference is None:
        inference = marginals(pot)
    T = pot.num_frames
    unary_grad = inference.unary_marginals.copy()
    unary_grad[np.arange(T), y0] -= 1.0
    pairwise_grad = inference.pairwise_marginals.copy()
    if T > 1:
        pairwise_grad[np.arange(T - 1), y0[:-1], y0[1:]] -= 1.0
    return unary_grad, pairwise_grad


def viterbi(pot):
    """Maximum-score allowed sequence as 1-based labels.

    Deterministic: score ties prefer the smaller class index, applied in the
    final argmax and in every backtracking step.
    """
    labels, _ = dp.viterbi_path(pot.unary, pot.pairwise, pot.mask)
    return labels + 1
