"""JIT-compiled subset-vote kernels.

Each Monte-Carlo replicate draws its uniforms from splitmix64 at absolute
counter positions (replicate * steps + step), so results do not depend on
chunking or scheduling and match the numpy backend bit for bit.  A uniform
n-subset is drawn as the complement of a uniform (N - n)-subset when that is
smaller; the numpy backend makes the same choice so the streams line up.
Kernels return integer tallies of credit classes (class c >= 1 means credit
1/c, class 0 means no credit); converting tallies to an accuracy value
happens once, outside, in exact rational arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_MUL1 = _U64(0xBF58476D1CE4E5B9)
_MUL2 = _U64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True, inline="always")
def _uniform(key, counter):
    z = key + counter + _GAMMA
    z = (z ^ (z >> _U64(30))) * _MUL1
    z = (z ^ (z >> _U64(27))) * _MUL2
    z = z ^ (z >> _U64(31))
    return (z >> _U64(11)) * _INV_2_53


@njit(cache=True, nogil=True)
def _credit_class(counts, first_pos, gold, m, n_total, first_seen):
    if first_seen:
        # leader = max count, ties broken by earliest first occurrence
        best = -1
        best_score = -1
        for j in range(m):
            score = counts[j] * (n_total + 1) + (n_total - first_pos[j])
            if score > best_score:
                best_score = score
                best = j
        return 1 if best == gold else 0
    vmax = 0
    for j in range(m):
        if counts[j] > vmax:
            vmax = counts[j]
    if gold < 0 or counts[gold] != vmax:
        return 0
    ties = 0
    for j in range(m):
        if counts[j] == vmax:
            ties += 1
    return ties


@njit(cache=True, nogil=True)
def mc_tally(answers, gold, n, m, key, reps, first_seen):
    """Tally credit classes over `reps` uniform n-subsets of the trace."""
    n_total = answers.shape[0]
    k = n if 2 * n <= n_total else n_total - n
    complement = k != n
    tally = np.zeros(m + 1, dtype=np.int64)
    full = np.zeros(m, dtype=np.int64)
    for i in range(n_total):
        full[answers[i]] += 1
    member = np.zeros(n_total, dtype=np.bool_)
    chosen = np.empty(max(k, 1), dtype=np.int64)
    sub = np.empty(m, dtype=np.int64)
    counts = np.empty(m, dtype=np.int64)
    first_pos = np.empty(m, dtype=np.int64)
    ukey = _U64(key)
    for rep in range(reps):
        base = _U64(rep) * _U64(k)
        for a in range(m):
            sub[a] = 0
        # Floyd's sampling: exactly k uniforms per replicate
        for step in range(k):
            j = n_total - k + step
            u = _uniform(ukey, base + _U64(step))
            t = int(u * (j + 1))
            pos = j if member[t] else t
            member[pos] = True
            chosen[step] = pos
            sub[answers[pos]] += 1
        if first_seen:
            for a in range(m):
                first_pos[a] = n_total
            if complement:
                for a in range(m):
                    counts[a] = 0
                for p in range(n_total):
                    if not member[p]:
                        a = answers[p]
                        counts[a] += 1
                        if p < first_pos[a]:
                            first_pos[a] = p
            else:
                for a in range(m):
                    counts[a] = sub[a]
                for i in range(k):
                    p = chosen[i]
                    a = answers[p]
                    if p < first_pos[a]:
                        first_pos[a] = p
        else:
            if complement:
                for a in range(m):
                    counts[a] = full[a] - sub[a]
            else:
                for a in range(m):
                    counts[a] = sub[a]
        tally[_credit_class(counts, first_pos, gold, m, n_total, first_seen)] += 1
        for i in range(k):
            member[chosen[i]] = False
    return tally


@njit(cache=True, nogil=True)
def enum_tally(answers, gold, n, m, first_seen):
    """Tally credit classes over all C(n_total, n) subsets, in index order."""
    n_total = answers.shape[0]
    tally = np.zeros(m + 1, dtype=np.int64)
    idx = np.arange(n, dtype=np.int64)
    counts = np.empty(m, dtype=np.int64)
    first_pos = np.empty(m, dtype=np.int64)
    while True:
        for a in range(m):
            counts[a] = 0
            first_pos[a] = n_total
        for i in range(n):
            pos = idx[i]
            a = answers[pos]
            counts[a] += 1
            if pos < first_pos[a]:
                first_pos[a] = pos
        tally[_credit_class(counts, first_pos, gold, m, n_total, first_seen)] += 1
        # lexicographic successor
        i = n - 1
        while i >= 0 and idx[i] == n_total - n + i:
            i -= 1
        if i < 0:
            return tally
        idx[i] += 1
        for j in range(i + 1, n):
            idx[j] = idx[j - 1] + 1
