"""Travel-cost model and the three canvassing policies.

Cost convention: entering a neighborhood costs alpha and covers its first
visited property; each additional property inside costs the intra rate (1 by
convention). A full neighborhood of m properties therefore costs
alpha + (m - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .city import CityModel


class OrderingKey(Enum):
    HIGH_RISK_COUNT = "high_risk_count"
    PRIOR_EVICTIONS = "prior_evictions"


@dataclass(frozen=True)
class CostModel:
    """intra_cost per extra property inside a neighborhood, inter_cost (alpha) to enter one."""

    inter_cost: float
    intra_cost: float = 1.0

    def __post_init__(self):
        if not self.intra_cost > 0:
            raise ValueError("intra_cost must be positive")
        if self.inter_cost < self.intra_cost:
            raise ValueError("inter_cost must be at least intra_cost")


@dataclass(frozen=True)
class NeighborhoodOrder:
    ids: tuple[int, ...]
    ordering_key: OrderingKey


@dataclass(frozen=True)
class CanvassPlan:
    """Ordered (neighborhood_id, rank) visits with their routing cost and risk split."""

    visits: tuple[tuple[int, int], ...]
    total_cost: float
    visited_high_risk: int
    visited_low_risk: int

    @property
    def num_visits(self) -> int:
        return len(self.visits)


def order_neighborhoods(
    model: CityModel,
    key: OrderingKey = OrderingKey.HIGH_RISK_COUNT,
    prior_evictions=None,
) -> NeighborhoodOrder:
    """Rank neighborhoods by the chosen key, descending; ties go to the lower id."""
    if key is OrderingKey.HIGH_RISK_COUNT:
        cutoff = model.high_risk_cutoff_rank
        scores = [int((ranks <= cutoff).sum()) for ranks in model.assignment]
    elif key is OrderingKey.PRIOR_EVICTIONS:
        if prior_evictions is None:
            raise ValueError("prior_evictions required for PRIOR_EVICTIONS ordering")
        scores = [float(v) for v in prior_evictions]
        if len(scores) != model.num_neighborhoods:
            raise ValueError("prior_evictions length must equal the neighborhood count")
    else:
        raise ValueError(f"unknown ordering key: {key!r}")
    ids = sorted(range(1, model.num_neighborhoods + 1), key=lambda b: (-scores[b - 1], b))
    return NeighborhoodOrder(ids=tuple(ids), ordering_key=key)


def route_cost(visits, cost_model: CostModel) -> float:
    """Cost of a visit sequence: alpha per maximal same-neighborhood run, +1 per extra stop."""
    seen = set()
    cost = 0.0
    prev_nb = None
    for nb, rank in visits:
        if (nb, rank) in seen:
            raise ValueError(f"duplicate visit: neighborhood {nb}, rank {rank}")
        seen.add((nb, rank))
        if nb != prev_nb:
            cost += cost_model.inter_cost
            prev_nb = nb
        else:
            cost += cost_model.intra_cost
    return cost


def budget_for_neighborhoods(
    model: CityModel, order: NeighborhoodOrder, m: int, cost_model: CostModel
) -> float:
    """Cost of fully canvassing the first m neighborhoods in the given order."""
    if not 1 <= m <= model.num_neighborhoods:
        raise ValueError(f"m must lie in 1..{model.num_neighborhoods}, got {m}")
    cost = 0.0
    for nb in order.ids[:m]:
        size = model.assignment[nb - 1].size
        cost += cost_model.inter_cost + (size - 1) * cost_model.intra_cost
    return cost


def _affordable_count(residual: float, available: int, cost_model: CostModel) -> int:
    # alpha covers the first property; each further one costs intra
    if residual < cost_model.inter_cost:
        return 0
    extra = math.floor((residual - cost_model.inter_cost) / cost_model.intra_cost)
    return min(available, 1 + extra)


def _build_plan(groups, cost_model: CostModel, cutoff: int) -> CanvassPlan:
    visits = []
    cost = 0.0
    hr = 0
    for nb, ranks in groups:
        if not len(ranks):
            continue
        cost += cost_model.inter_cost + (len(ranks) - 1) * cost_model.intra_cost
        for rank in ranks:
            visits.append((nb, int(rank)))
            if rank <= cutoff:
                hr += 1
    return CanvassPlan(
        visits=tuple(visits),
        total_cost=cost,
        visited_high_risk=hr,
        visited_low_risk=len(visits) - hr,
    )


def _greedy_by_neighborhood(model, order, budget, cost_model, high_risk_only: bool) -> CanvassPlan:
    if budget < 0:
        raise ValueError("budget must be >= 0")
    cutoff = model.high_risk_cutoff_rank
    groups = []
    spent = 0.0
    for nb in order.ids:
        ranks = np.sort(model.assignment[nb - 1])
        if high_risk_only:
            ranks = ranks[ranks <= cutoff]
            if ranks.size == 0:
                continue  # nothing to visit here, no travel paid
        take = _affordable_count(budget - spent, ranks.size, cost_model)
        if take == 0:
            break  # entering any further neighborhood costs alpha too
        groups.append((nb, ranks[:take].tolist()))
        spent += cost_model.inter_cost + (take - 1) * cost_model.intra_cost
    return _build_plan(groups, cost_model, cutoff)


def non_targeting(model, order: NeighborhoodOrder, budget: float, cost_model: CostModel) -> CanvassPlan:
    """Visit every property neighborhood by neighborhood until the budget runs out.

    The final affordable neighborhood is visited partially, in ascending rank
    order; a neighborhood is never entered with residual budget below alpha.
    """
    return _greedy_by_neighborhood(model, order, budget, cost_model, high_risk_only=False)


def hpt(model, order: NeighborhoodOrder, budget: float, cost_model: CostModel) -> CanvassPlan:
    """Same traversal as non_targeting but only High-Risk properties are visited.

    Neighborhoods holding no High-Risk property are skipped at zero cost.
    """
    return _greedy_by_neighborhood(model, order, budget, cost_model, high_risk_only=True)


def tpt(model: CityModel, budget: float, cost_model: CostModel) -> CanvassPlan:
    """Visit exactly the k* globally highest-risk properties, k* maximal under the budget.

    Routing cost of the top k is alpha per distinct neighborhood touched plus
    intra for every property beyond the first in its neighborhood; it is
    strictly increasing in k, so k* is found by binary search. Lower-ranked
    substitutes are never taken in place of an unaffordable high rank.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    total = model.total
    nb_of_rank = model.neighborhood_of_rank()
    # distinct_upto[k] = neighborhoods touched by ranks 1..k
    first_seen = np.zeros(total, dtype=bool)
    seen = set()
    for idx in range(total):
        nb = int(nb_of_rank[idx])
        if nb not in seen:
            seen.add(nb)
            first_seen[idx] = True
    distinct_upto = np.concatenate(([0], np.cumsum(first_seen)))

    def cost_top_k(k: int) -> float:
        d = int(distinct_upto[k])
        return d * cost_model.inter_cost + (k - d) * cost_model.intra_cost

    lo, hi = 0, total
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if cost_top_k(mid) <= budget:
            lo = mid
        else:
            hi = mid - 1
    k_star = lo

    counts = np.bincount(nb_of_rank[:k_star], minlength=model.num_neighborhoods + 1)
    by_count = sorted(
        (nb for nb in range(1, model.num_neighborhoods + 1) if counts[nb] > 0),
        key=lambda nb: (-counts[nb], nb),
    )
    top = np.arange(1, k_star + 1)
    groups = [(nb, top[nb_of_rank[:k_star] == nb].tolist()) for nb in by_count]
    return _build_plan(groups, cost_model, model.high_risk_cutoff_rank)
