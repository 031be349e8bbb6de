"""Brute-force reference implementations the fast code is tested against.

Everything here materializes all C^T label sequences, so keep T and C tiny.
The tie-break in `brute_viterbi` mirrors backtracking with a smallest-index
preference: the last label is minimized first, then the one before it, and
so on. Comparing reversed tuples implements exactly that order.
"""

import itertools

import numpy as np


def path_score(unary, pairwise, path):
    # Same accumulation order as the recursion: pairwise first, then unary,
    # so crafted exact ties round identically in both implementations.
    score = unary[0, path[0]]
    for t in range(1, len(path)):
        score = (score + pairwise[t - 1, path[t - 1], path[t]]) + unary[t, path[t]]
    return score


def allowed_paths(T, C, mask):
    for path in itertools.product(range(C), repeat=T):
        if all(mask[path[t], path[t + 1]] for t in range(T - 1)):
            yield path


def brute_log_partition(unary, pairwise, mask):
    T, C = unary.shape
    scores = [path_score(unary, pairwise, p) for p in allowed_paths(T, C, mask)]
    if not scores:
        raise ValueError("no allowed path")
    scores = np.array(scores)
    m = scores.max()
    return m + np.log(np.exp(scores - m).sum())


def brute_viterbi(unary, pairwise, mask):
    """Best allowed path, 0-based; ties broken like backtracking."""
    T, C = unary.shape
    best, best_score = None, -np.inf
    for path in allowed_paths(T, C, mask):
        s = path_score(unary, pairwise, path)
        if s > best_score:
            best, best_score = path, s
        elif s == best_score and tuple(reversed(path)) < tuple(reversed(best)):
            best = path
    if best is None:
        raise ValueError("no allowed path")
    return np.array(best), best_score


def brute_marginals(unary, pairwise, mask):
    T, C = unary.shape
    paths = list(allowed_paths(T, C, mask))
    scores = np.array([path_score(unary, pairwise, p) for p in paths])
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()
    un = np.zeros((T, C))
    pw = np.zeros((max(T - 1, 0), C, C))
    for path, w in zip(paths, weights):
        for t, c in enumerate(path):
            un[t, c] += w
        for t in range(T - 1):
            pw[t, path[t], path[t + 1]] += w
    return un, pw


def central_difference(fn, arr, step=1e-5):
    """Gradient of scalar fn(arr) by central differences, entry by entry."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        up = fn()
        arr[idx] = orig - step
        down = fn()
        arr[idx] = orig
        grad[idx] = (up - down) / (2 * step)
    return grad


def relative_error(a, b, floor=1e-3):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def random_table(rng, T=None, C=None, max_T=6, max_C=4, scale=2.0, monotone=True):
    """Random potentials plus a feasible mask (always keeps the diagonal)."""
    from stagecrf import crf

    T = T if T is not None else int(rng.integers(1, max_T + 1))
    C = C if C is not None else int(rng.integers(1, max_C + 1))
    if monotone:
        mask = crf.monotone_mask(C)
    else:
        mask = rng.random((C, C)) < 0.6
        np.fill_diagonal(mask, True)
    unary = rng.normal(0.0, scale, (T, C))
    pairwise = rng.normal(0.0, scale, (max(T - 1, 0), C, C))
    pairwise[:, ~mask] = 0.0
    return crf.PotentialTable(unary, pairwise, mask)
