"""Outcome model, discovered-eviction counts, the RENT metric, and sweeps.

RENT is the ratio of evictions discovered by the non-targeting baseline to
those discovered by a targeting policy at the same budget; lower means
targeting helps more. Sweeps report the expected (analytic) form, which is
p times High-Risk visits plus q times Low-Risk visits for each plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from .city import CityConfig, assign_to_neighborhoods, homogeneous_central_ranking
from .policies import (
    CanvassPlan,
    CostModel,
    OrderingKey,
    budget_for_neighborhoods,
    hpt,
    non_targeting,
    order_neighborhoods,
    tpt,
)
from .rankings import MallowsParams, sample_rim


class PolicyKind(Enum):
    HPT = "hpt"
    TPT = "tpt"


@dataclass(frozen=True)
class OutcomeModel:
    """p = Pr(eviction | High-Risk), q = Pr(eviction | Low-Risk)."""

    p: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or not 0.0 <= self.q <= 1.0:
            raise ValueError("p and q must lie in [0, 1]")


@dataclass(frozen=True)
class InterventionScenario:
    """Relative reduction of eviction probability at every canvassed property."""

    reduction_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.reduction_fraction <= 1.0:
            raise ValueError("reduction_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class RentResult:
    s_b: float
    s_t: float
    rent: float | None  # None marks an undefined ratio (s_t = 0)
    budget: float | None = None
    policy_kind: PolicyKind | None = None


@dataclass(frozen=True)
class RentSweepRow:
    phi: float
    num_neighborhoods: int
    properties_per: int
    m: int
    alpha: float
    fraction: float
    p: float
    q: float
    policy: str
    mean_rent: float | None
    stderr_rent: float | None
    mean_s_b: float
    mean_s_t: float
    replicates: int


def expected_discovered(plan: CanvassPlan, outcome: OutcomeModel) -> float:
    return outcome.p * plan.visited_high_risk + outcome.q * plan.visited_low_risk


def realized_discovered(plan: CanvassPlan, outcomes) -> int:
    """Count visited properties whose eviction bit is 1; bits indexed by rank-1."""
    bits = np.asarray(outcomes)
    count = 0
    for _, rank in plan.visits:
        if rank - 1 >= bits.size:
            raise ValueError(f"no eviction outcome for rank {rank}")
        count += int(bits[rank - 1])
    return count


def rent(
    plan_b: CanvassPlan,
    plan_t: CanvassPlan,
    outcome: OutcomeModel,
    policy_kind: PolicyKind | None = None,
    budget: float | None = None,
) -> RentResult:
    """Expected-discovery RENT of a baseline plan against a targeting plan."""
    s_b = expected_discovered(plan_b, outcome)
    s_t = expected_discovered(plan_t, outcome)
    ratio = s_b / s_t if s_t > 0 else None
    return RentResult(s_b=s_b, s_t=s_t, rent=ratio, budget=budget, policy_kind=policy_kind)


def expected_reduction(plan: CanvassPlan, calibrated_probs, scenario: InterventionScenario) -> float:
    """reduction_fraction times the summed eviction probability over visited properties."""
    probs = np.asarray(calibrated_probs, dtype=np.float64)
    total = 0.0
    for _, rank in plan.visits:
        if rank - 1 >= probs.size:
            raise ValueError(f"no calibrated probability for rank {rank}")
        pr = probs[rank - 1]
        if not 0.0 <= pr <= 1.0:
            raise ValueError(f"calibrated probability out of range at rank {rank}: {pr}")
        total += pr
    return scenario.reduction_fraction * total


def _replicate_rng(base_seed: int, grid_index: int, replicate: int) -> np.random.Generator:
    # grid points and replicates are independently reproducible
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(grid_index, replicate))
    return np.random.default_rng(ss)


def simulate_rent_once(
    phi: float,
    config: CityConfig,
    m: int,
    cost_model: CostModel,
    outcome: OutcomeModel,
    policy_kind: PolicyKind,
    rng: np.random.Generator,
) -> RentResult:
    """One replicate: sample a city, budget for m neighborhoods, run both policies."""
    n = config.properties_per
    center = homogeneous_central_ranking(config.num_neighborhoods, n)
    r = sample_rim(MallowsParams(center=center, phi=phi), rng)
    model = assign_to_neighborhoods(r, config)
    order = order_neighborhoods(model, OrderingKey.HIGH_RISK_COUNT)
    budget = budget_for_neighborhoods(model, order, m, cost_model)
    plan_b = non_targeting(model, order, budget, cost_model)
    if policy_kind is PolicyKind.HPT:
        plan_t = hpt(model, order, budget, cost_model)
    else:
        plan_t = tpt(model, budget, cost_model)
    return rent(plan_b, plan_t, outcome, policy_kind=policy_kind, budget=budget)


def rent_sweep(
    phis,
    num_neighborhoods: int,
    properties_per: int,
    m_values,
    alphas,
    fraction: float,
    p: float,
    q: float,
    policy_kind: PolicyKind,
    replicates: int,
    base_seed: int,
) -> list[RentSweepRow]:
    """Mean/stderr RENT per (phi, alpha, m) grid point, deterministic in base_seed."""
    phis = list(phis)
    alphas = list(alphas)
    m_values = list(m_values)
    if not phis or not alphas or not m_values:
        raise ValueError("phi, alpha, and m grids must be nonempty")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    outcome = OutcomeModel(p=p, q=q)
    config = CityConfig(
        num_neighborhoods=num_neighborhoods,
        properties_per=properties_per,
        high_risk_fraction=fraction,
    )
    rows = []
    for grid_index, (phi, alpha, m) in enumerate(product(phis, alphas, m_values)):
        cost_model = CostModel(inter_cost=alpha)
        rents = []
        s_bs = []
        s_ts = []
        for rep in range(replicates):
            rng = _replicate_rng(base_seed, grid_index, rep)
            res = simulate_rent_once(phi, config, m, cost_model, outcome, policy_kind, rng)
            rents.append(res.rent)
            s_bs.append(res.s_b)
            s_ts.append(res.s_t)
        if any(v is None for v in rents):
            mean_rent, stderr = None, None
        else:
            arr = np.asarray(rents, dtype=np.float64)
            mean_rent = float(arr.mean())
            stderr = float(arr.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
        rows.append(RentSweepRow(
            phi=phi,
            num_neighborhoods=num_neighborhoods,
            properties_per=properties_per,
            m=m,
            alpha=alpha,
            fraction=fraction,
            p=p,
            q=q,
            policy=policy_kind.value,
            mean_rent=mean_rent,
            stderr_rent=stderr,
            mean_s_b=float(np.mean(s_bs)),
            mean_s_t=float(np.mean(s_ts)),
            replicates=replicates,
        ))
    return rows
