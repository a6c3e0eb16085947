"""
Suffix ranking by prefix doubling over integer sequences (numpy).

Used by the large-input piece scan: the longest common prefix over a set
of suffixes is always attained by two suffixes that are adjacent in
sorted order, so only neighbours need comparing.
"""

import logging

import numpy as np


def suffix_ranks(seq) -> np.ndarray:
    """
    Rank of every suffix of `seq` in lexicographic order.

    Prefix doubling: ranks of length-2k prefixes are the ranks of the pairs
    (rank of the k-prefix, rank of the k-prefix k positions later).
    O(n log^2 n) with numpy sorts.

    Args:
        seq: Integer sequence (any comparable integer values)

    Returns:
        np.ndarray: rank[i] is the position of suffix i in sorted order
    """
    text = np.asarray(seq, dtype=np.int64)
    n = text.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    _, rank = np.unique(text, return_inverse=True)
    rank = rank.reshape(-1).astype(np.int64)
    k = 1
    rounds = 0
    while rank.max() < n - 1:
        second = np.full(n, -1, dtype=np.int64)
        if k < n:
            second[:n - k] = rank[k:]
        keys = rank * (n + 1) + second + 1
        _, rank = np.unique(keys, return_inverse=True)
        rank = rank.reshape(-1).astype(np.int64)
        k <<= 1
        rounds += 1
    logging.debug(f"Suffix ranks of {n} letters after {rounds} doubling rounds")
    return rank


def suffix_array(seq) -> np.ndarray:
    """Start positions of the suffixes of `seq` in lexicographic order."""
    return np.argsort(suffix_ranks(seq), kind='stable')


def common_prefix_length(text: np.ndarray, i: int, j: int, limit: int) -> int:
    """Length of the common prefix of text[i:] and text[j:], capped at `limit`."""
    left = text[i:i + limit]
    right = text[j:j + limit]
    size = min(left.size, right.size)
    diff = np.flatnonzero(left[:size] != right[:size])
    return int(diff[0]) if diff.size else size


def max_capped_common_prefix(text, starts, caps, involved=None, ranks=None) -> tuple[int, int, int]:
    """
    Maximum over pairs a != b of min(lcp(starts[a], starts[b]), caps[a], caps[b]).

    For each distinct cap t (largest first), the suffixes with cap >= t are
    scanned in sorted order and adjacent pairs compared up to t letters. A
    pair is counted at t = min of its caps, which is where its capped value
    is exact.

    Args:
        text: Integer sequence holding every suffix
        starts: Start positions of the candidate suffixes
        caps: Per-candidate cap (text must hold cap letters from each start)
        involved: Optional boolean mask; if given, only pairs with at least
            one involved candidate count
        ranks: Precomputed suffix_ranks(text), reused across scans

    Returns:
        (length, a, b): best capped length and the candidate indices realizing
        it, or (0, -1, -1) when no pair qualifies
    """
    text = np.asarray(text, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    caps = np.asarray(caps, dtype=np.int64)
    mask = None if involved is None else np.asarray(involved, dtype=bool)
    if starts.size < 2:
        return 0, -1, -1

    if ranks is None:
        ranks = suffix_ranks(text)
    order = np.argsort(ranks[starts], kind='stable')

    best = (0, -1, -1)
    found_pair = False
    for t in np.unique(caps)[::-1]:
        t = int(t)
        if found_pair and t <= best[0]:
            break
        keep = order[caps[order] >= t]
        for a, b in zip(keep[:-1].tolist(), keep[1:].tolist()):
            if mask is not None and not (mask[a] or mask[b]):
                continue
            length = common_prefix_length(text, int(starts[a]), int(starts[b]), t)
            if not found_pair or length > best[0]:
                best = (length, a, b)
                found_pair = True
    return best
