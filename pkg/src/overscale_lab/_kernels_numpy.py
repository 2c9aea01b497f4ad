"""Pure-numpy fallback for the subset-vote kernels.

Implements the exact same algorithms as the numba backend (same splitmix64
counters, same Floyd sampling decisions, same leader scoring), vectorised over
replicate chunks, so tallies are bit-identical across backends.
"""

from __future__ import annotations

import itertools

import numpy as np

from ._rng import counter_uniform_array

_MC_CHUNK = 8192
_ENUM_CHUNK = 16384


def _tally_members(member: np.ndarray, positions_by_answer: list[np.ndarray],
                   gold: int, m: int, first_seen: bool) -> np.ndarray:
    rows, n_total = member.shape
    counts = np.empty((rows, m), dtype=np.int64)
    if first_seen:
        first_pos = np.empty((rows, m), dtype=np.int64)
    for j in range(m):
        sel = member[:, positions_by_answer[j]]
        counts[:, j] = sel.sum(axis=1)
        if first_seen:
            pos = np.where(sel, positions_by_answer[j][None, :], n_total)
            first_pos[:, j] = pos.min(axis=1)
    tally = np.zeros(m + 1, dtype=np.int64)
    if first_seen:
        score = counts * (n_total + 1) + (n_total - first_pos)
        winner = np.argmax(score, axis=1)
        hits = int(np.count_nonzero(winner == gold)) if gold >= 0 else 0
        tally[1] = hits
        tally[0] = rows - hits
        return tally
    vmax = counts.max(axis=1)
    ties = (counts == vmax[:, None]).sum(axis=1)
    if gold >= 0:
        cls = np.where(counts[:, gold] == vmax, ties, 0)
    else:
        cls = np.zeros(rows, dtype=np.int64)
    tally += np.bincount(cls, minlength=m + 1)[: m + 1]
    return tally


def mc_tally(answers: np.ndarray, gold: int, n: int, m: int, key: int,
             reps: int, first_seen: bool) -> np.ndarray:
    n_total = answers.shape[0]
    # sample the smaller side and complement, same choice as the numba kernel
    k = n if 2 * n <= n_total else n_total - n
    complement = k != n
    positions_by_answer = [np.flatnonzero(answers == j) for j in range(m)]
    tally = np.zeros(m + 1, dtype=np.int64)
    for start in range(0, reps, _MC_CHUNK):
        rows = min(_MC_CHUNK, reps - start)
        # absolute counters keep chunk boundaries invisible to the stream
        ctr = (np.arange(start, start + rows, dtype=np.uint64)[:, None]
               * np.uint64(k)
               + np.arange(k, dtype=np.uint64)[None, :])
        u = counter_uniform_array(key, ctr)
        member = np.zeros((rows, n_total), dtype=bool)
        row_idx = np.arange(rows)
        for step in range(k):
            j = n_total - k + step
            t = (u[:, step] * (j + 1)).astype(np.int64)
            taken = member[row_idx, t]
            chosen = np.where(taken, j, t)
            member[row_idx, chosen] = True
        subset = ~member if complement else member
        tally += _tally_members(subset, positions_by_answer, gold, m, first_seen)
    return tally


def enum_tally(answers: np.ndarray, gold: int, n: int, m: int,
               first_seen: bool) -> np.ndarray:
    n_total = answers.shape[0]
    positions_by_answer = [np.flatnonzero(answers == j) for j in range(m)]
    tally = np.zeros(m + 1, dtype=np.int64)
    combos = itertools.combinations(range(n_total), n)
    while True:
        block = list(itertools.islice(combos, _ENUM_CHUNK))
        if not block:
            return tally
        idx = np.array(block, dtype=np.int64)
        member = np.zeros((len(block), n_total), dtype=bool)
        member[np.arange(len(block))[:, None], idx] = True
        tally += _tally_members(member, positions_by_answer, gold, m, first_seen)
