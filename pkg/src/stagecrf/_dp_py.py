"""Pure NumPy chain dynamic-programming kernels.

Fallback implementation of the recursions in ``stagecrf._dp_c``; the two
modules share contracts exactly. All recursions run in log space with a
max-shifted log-sum-exp. Forbidden transitions are excluded from every
reduction before any arithmetic happens, so the values stored at masked
positions never influence a result.
"""

import numpy as np

from .errors import NoAllowedPathError


def forward_pass(unary, pairwise, mask):
    """Masked log-space forward recursion.

    Parameters
    ----------
    unary : (T, C) float array
        Per-frame state scores.
    pairwise : (T-1, C, C) float array
        Per-step transition scores, entry (t, a, b) scoring a -> b.
    mask : (C, C) bool array
        True where the transition a -> b is allowed.

    Returns
    -------
    alpha : (T, C) float array
        Log-sum of exp path scores over allowed paths ending in each state.
        Entries where ``reach`` is False are meaningless placeholders.
    reach : (T, C) bool array
        False where no allowed path reaches the state.
    log_partition : float
    """
    T, C = unary.shape
    alpha = np.zeros((T, C))
    reach = np.zeros((T, C), dtype=bool)
    alpha[0] = unary[0]
    reach[0] = True
    for t in range(T - 1):
        valid = mask & reach[t][:, None]
        scores = np.where(valid, alpha[t][:, None] + pairwise[t], -np.inf)
        nxt = valid.any(axis=0)
        if not nxt.any():
            raise NoAllowedPathError(f"no allowed transition into frame {t + 1}")
        shift = np.where(nxt, scores.max(axis=0), 0.0)
        total = np.exp(scores - shift).sum(axis=0)
        lse = shift + np.log(np.where(nxt, total, 1.0))
        alpha[t + 1] = np.where(nxt, unary[t + 1] + lse, 0.0)
        reach[t + 1] = nxt
    last = alpha[T - 1][reach[T - 1]]
    shift = last.max()
    log_partition = float(shift + np.log(np.exp(last - shift).sum()))
    return alpha, reach, log_partition


def backward_pass(unary, pairwise, mask):
    """Masked log-space backward recursion.

    Returns (beta, reach) shaped like the forward quantities; ``beta[t, a]``
    sums exp scores of allowed continuations from state a at frame t, the
    continuation picking up unary terms from frame t+1 onward.
    """
    T, C = unary.shape
    beta = np.zeros((T, C))
    reach = np.zeros((T, C), dtype=bool)
    reach[T - 1] = True
    for t in range(T - 2, -1, -1):
        valid = mask & reach[t + 1][None, :]
        cont = unary[t + 1] + beta[t + 1]
        scores = np.where(valid, pairwise[t] + cont[None, :], -np.inf)
        cur = valid.any(axis=1)
        shift = np.where(cur, scores.max(axis=1), 0.0)
        total = np.exp(scores - shift[:, None]).sum(axis=1)
        beta[t] = np.where(cur, shift + np.log(np.where(cur, total, 1.0)), 0.0)
        reach[t] = cur
    return beta, reach


def viterbi_path(unary, pairwise, mask):
    """Maximum-score allowed state sequence (0-based labels).

    Ties prefer the smaller state index, both in the final argmax and in
    every backtracking step. Returns (labels, best_score).
    """
    T, C = unary.shape
    delta = np.zeros((T, C))
    reach = np.zeros((T, C), dtype=bool)
    back = np.zeros((T, C), dtype=np.int64)
    delta[0] = unary[0]
    reach[0] = True
    for t in range(T - 1):
        valid = mask & reach[t][:, None]
        scores = np.where(valid, delta[t][:, None] + pairwise[t], -np.inf)
        nxt = valid.any(axis=0)
        if not nxt.any():
            raise NoAllowedPathError(f"no allowed transition into frame {t + 1}")
        back[t + 1] = scores.argmax(axis=0)  # first max = smallest predecessor
        delta[t + 1] = np.where(nxt, unary[t + 1] + scores.max(axis=0), 0.0)
        reach[t + 1] = nxt
    final = np.where(reach[T - 1], delta[T - 1], -np.inf)
    labels = np.empty(T, dtype=np.int64)
    labels[T - 1] = int(final.argmax())
    for t in range(T - 2, -1, -1):
        labels[t] = back[t + 1, labels[t + 1]]
    return labels, float(final[labels[T - 1]])
