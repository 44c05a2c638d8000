"""Permutation distances, the Mallows distribution, and samplers.

Rankings are permutations of 1..n stored as integer arrays: position i holds
the rank of the property placed at slot i. The Mallows model puts probability
proportional to phi^d(r, center) on each ranking r.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np


class Distance(Enum):
    KENDALL_TAU = "kendall_tau"
    SPEARMAN_FOOTRULE = "spearman_footrule"


def as_ranking(items) -> np.ndarray:
    """Validate and return a ranking as an int64 array.

    Raises ValueError unless items is a permutation of 1..n, n >= 1.
    """
    r = np.asarray(items, dtype=np.int64)
    if r.ndim != 1 or r.size < 1:
        raise ValueError("ranking must be a nonempty 1-D sequence")
    if not np.array_equal(np.sort(r), np.arange(1, r.size + 1)):
        raise ValueError("ranking must be a permutation of 1..n")
    return r


@dataclass(eq=False)
class MallowsParams:
    """Center ranking, dispersion phi in [0, 1], and the distance in use.

    phi = 0 is a point mass on the center; phi = 1 is the uniform limit.
    """

    center: np.ndarray
    phi: float
    distance_kind: Distance = Distance.KENDALL_TAU

    def __post_init__(self):
        self.center = as_ranking(self.center)
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")
        if not isinstance(self.distance_kind, Distance):
            raise ValueError(f"unknown distance kind: {self.distance_kind!r}")

    @property
    def n(self) -> int:
        return int(self.center.size)


def _inverse_positions(r: np.ndarray) -> np.ndarray:
    # pos[v-1] = slot index of value v
    pos = np.empty(r.size, dtype=np.int64)
    pos[r - 1] = np.arange(r.size)
    return pos


def _merge_count(seq: list) -> tuple[list, int]:
    # merge sort that counts inversions along the way
    n = len(seq)
    if n <= 1:
        return seq, 0
    mid = n // 2
    left, inv_l = _merge_count(seq[:mid])
    right, inv_r = _merge_count(seq[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            # right[j] jumps ahead of everything left in `left`
            inv += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def kendall_tau(a, b) -> int:
    """Number of item pairs ordered differently in a vs. b (O(n log n))."""
    ra, rb = as_ranking(a), as_ranking(b)
    if ra.size != rb.size:
        raise ValueError("rankings must have equal length")
    # express a in b's coordinate system; discordant pairs become inversions
    pos_b = _inverse_positions(rb)
    composed = pos_b[ra - 1]
    _, inv = _merge_count(composed.tolist())
    return inv


def spearman_footrule(a, b) -> int:
    """Sum over items of absolute slot displacement between a and b."""
    ra, rb = as_ranking(a), as_ranking(b)
    if ra.size != rb.size:
        raise ValueError("rankings must have equal length")
    return int(np.abs(_inverse_positions(ra) - _inverse_positions(rb)).sum())


def mallows_normalizer(n: int, phi: float):
    """Z = sum over all n! permutations of phi^d_kendall(r, center).

    Closed form prod_{j=1..n} (1 - phi^j)/(1 - phi) for phi < 1; n! at phi = 1.
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    if phi == 1.0:
        return math.factorial(n)
    return math.prod((1.0 - phi ** j) / (1.0 - phi) for j in range(1, n + 1))


@lru_cache(maxsize=None)
def _footrule_distance_counts(n: int) -> tuple:
    # histogram of footrule distances over S_n; enumeration only feasible small
    if n > 8:
        raise NotImplementedError(
            "footrule normalizer is enumerated and supported only for n <= 8"
        )
    slots = np.arange(n)
    counts: dict[int, int] = {}
    for perm in itertools.permutations(range(n)):
        d = int(sum(abs(perm[i] - slots[i]) for i in range(n)))
        counts[d] = counts.get(d, 0) + 1
    return tuple(sorted(counts.items()))


def footrule_normalizer(n: int, phi: float) -> float:
    """Sum of phi^d_footrule over S_n, by exhaustive enumeration (n <= 8)."""
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    return float(sum(c * phi ** d for d, c in _footrule_distance_counts(n)))


def mallows_pmf(r, params: MallowsParams) -> float:
    """P(r) = phi^d(r, center) / Z under the configured distance."""
    rr = as_ranking(r)
    if rr.size != params.n:
        raise ValueError("ranking length does not match the center")
    if params.distance_kind is Distance.KENDALL_TAU:
        d = kendall_tau(rr, params.center)
        z = mallows_normalizer(params.n, params.phi)
    else:
        d = spearman_footrule(rr, params.center)
        z = footrule_normalizer(params.n, params.phi)
    if params.phi == 0.0:
        return 1.0 if d == 0 else 0.0
    return params.phi ** d / z


def sample_rim(params: MallowsParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one ranking exactly from the Kendall-tau Mallows PMF.

    Repeated insertion: the i-th item of the center enters at position j with
    probability proportional to phi^(i-j), adding k = i-j new inversions. The
    per-step k are truncated-geometric and drawn in one vectorized pass.
    """
    if params.distance_kind is not Distance.KENDALL_TAU:
        raise NotImplementedError("exact insertion sampling covers Kendall tau only; use sample_mh")
    center, phi, n = params.center, params.phi, params.n
    if n == 1 or phi == 0.0:
        return center.copy()
    i = np.arange(2, n + 1, dtype=np.float64)
    u = rng.random(n - 1)
    if phi == 1.0:
        k = np.minimum((u * i).astype(np.int64), (i - 1).astype(np.int64))
    else:
        # inverse CDF of P(k) ∝ phi^k on k = 0..i-1
        k = np.ceil(np.log1p(-u * (1.0 - phi ** i)) / math.log(phi)).astype(np.int64) - 1
        k = np.clip(k, 0, (i - 1).astype(np.int64))
    out = [int(center[0])]
    for item, ki in zip(center[1:].tolist(), k.tolist()):
        out.insert(len(out) - ki, item)
    return np.array(out, dtype=np.int64)


def sample_mh(params: MallowsParams, rng: np.random.Generator, steps: int | None = None) -> np.ndarray:
    """Metropolis chain with adjacent-transposition proposals, started at the center.

    Returns the state after `steps` proposals (accepted or not); default
    20*n^2. Works for either distance; the stationary law is the Mallows PMF.
    """
    center, phi, n = params.center, params.phi, params.n
    if steps is None:
        steps = 20 * n * n
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if n == 1:
        return center.copy()
    sigma_pos = _inverse_positions(center)
    state = center.tolist()
    idx = rng.integers(0, n - 1, size=steps)
    us = rng.random(steps)
    kendall = params.distance_kind is Distance.KENDALL_TAU
    # adjacent swaps change the distance by +-1 (Kendall) or {-2, 0, +2}
    # (footrule), so only one uphill acceptance probability exists
    p_up = phi if kendall else phi * phi
    for t in range(steps):
        i = idx[t]
        a, b = state[i], state[i + 1]
        if kendall:
            delta = 1 if sigma_pos[a - 1] < sigma_pos[b - 1] else -1
        else:
            pa, pb = sigma_pos[a - 1], sigma_pos[b - 1]
            delta = (abs(i + 1 - pa) - abs(i - pa)) + (abs(i - pb) - abs(i + 1 - pb))
        if delta <= 0 or us[t] < p_up:
            state[i], state[i + 1] = b, a
    return np.array(state, dtype=np.int64)
