"""Cost model, neighborhood ordering, and the three canvassing policies."""

import numpy as np
import pytest

from canvassim.city import CityConfig, assign_to_neighborhoods, homogeneous_central_ranking
from canvassim.policies import (
    CostModel,
    OrderingKey,
    budget_for_neighborhoods,
    hpt,
    non_targeting,
    order_neighborhoods,
    route_cost,
    tpt,
)


def make_model(r, sizes, fraction):
    config = CityConfig(num_neighborhoods=len(sizes), neighborhood_sizes=tuple(sizes),
                        high_risk_fraction=fraction)
    return assign_to_neighborhoods(r, config)


def make_uniform_model(num_neighborhoods, per, fraction=0.2, r=None):
    config = CityConfig(num_neighborhoods=num_neighborhoods, properties_per=per,
                        high_risk_fraction=fraction)
    if r is None:
        r = homogeneous_central_ranking(num_neighborhoods, per)
    return assign_to_neighborhoods(r, config)


def random_instance(rng):
    n_nb = int(rng.integers(2, 21))
    sizes = [int(s) for s in rng.integers(1, 11, size=n_nb)]
    total = sum(sizes)
    r = rng.permutation(np.arange(1, total + 1))
    fraction = float(rng.uniform(0.1, 0.9))
    model = make_model(r, sizes, fraction)
    cost_model = CostModel(inter_cost=float(rng.integers(1, 7)))
    budget = float(rng.uniform(0, total + n_nb * cost_model.inter_cost))
    return model, cost_model, budget


def test_cost_model_validation():
    CostModel(inter_cost=1.0)  # alpha == intra is allowed
    with pytest.raises(ValueError):
        CostModel(inter_cost=0.5, intra_cost=1.0)
    with pytest.raises(ValueError):
        CostModel(inter_cost=3.0, intra_cost=0.0)


def test_route_cost_examples():
    cm = CostModel(inter_cost=3.0)
    assert route_cost([], cm) == 0.0
    assert route_cost([(1, r) for r in range(1, 13)], cm) == 14.0
    visits = [(nb, r) for nb in (1, 2, 3) for r in range((nb - 1) * 12 + 1, nb * 12 + 1)]
    assert route_cost(visits, cm) == 42.0


def test_route_cost_charges_alpha_per_run():
    cm = CostModel(inter_cost=3.0)
    # revisiting a neighborhood after leaving pays alpha again
    assert route_cost([(1, 1), (2, 3), (1, 2)], cm) == 9.0
    with pytest.raises(ValueError):
        route_cost([(1, 1), (1, 1)], cm)


def test_order_neighborhoods_by_high_risk_count():
    # HR counts per neighborhood: 2, 1, 0
    model = make_model([1, 2, 4, 3, 5, 6], (3, 2, 1), 0.5)
    order = order_neighborhoods(model)
    assert order.ids == (1, 2, 3)
    assert order.ordering_key is OrderingKey.HIGH_RISK_COUNT
    # reversed layout: counts 0, 1, 2
    model = make_model([6, 5, 4, 3, 2, 1], (2, 2, 2), 0.5)
    assert order_neighborhoods(model).ids == (3, 2, 1)


def test_order_neighborhoods_ties_go_to_lower_id():
    model = make_uniform_model(3, 2, fraction=0.5, r=np.array([1, 4, 2, 5, 3, 6]))
    assert order_neighborhoods(model).ids == (1, 2, 3)


def test_order_neighborhoods_by_prior_evictions():
    model = make_uniform_model(3, 2)
    order = order_neighborhoods(model, key=OrderingKey.PRIOR_EVICTIONS,
                                prior_evictions=[0.0, 9.0, 4.0])
    assert order.ids == (2, 3, 1)
    with pytest.raises(ValueError):
        order_neighborhoods(model, key=OrderingKey.PRIOR_EVICTIONS)
    with pytest.raises(ValueError):
        order_neighborhoods(model, key=OrderingKey.PRIOR_EVICTIONS, prior_evictions=[1.0])


def test_budget_for_neighborhoods_examples():
    cm = CostModel(inter_cost=3.0)
    model = make_uniform_model(50, 12)
    order = order_neighborhoods(model)
    assert budget_for_neighborhoods(model, order, 10, cm) == 140.0
    assert budget_for_neighborhoods(model, order, 1, CostModel(inter_cost=50.0)) == 61.0
    n_nb, per, alpha = 7, 5, 4.0
    small = make_uniform_model(n_nb, per)
    small_order = order_neighborhoods(small)
    full = budget_for_neighborhoods(small, small_order, n_nb, CostModel(inter_cost=alpha))
    assert full == n_nb * (alpha + per - 1)
    with pytest.raises(ValueError):
        budget_for_neighborhoods(model, order, 0, cm)
    with pytest.raises(ValueError):
        budget_for_neighborhoods(model, order, 51, cm)


def test_non_targeting_trace():
    cm = CostModel(inter_cost=3.0)
    model = make_uniform_model(3, 12)
    order = order_neighborhoods(model)
    plan = non_targeting(model, order, 20.0, cm)
    # one full neighborhood (14) then 4 properties of the next (3 + 3)
    assert plan.num_visits == 16
    assert plan.total_cost == 20.0
    assert plan.visits[:12] == tuple((1, r) for r in range(1, 13))
    assert plan.visits[12:] == tuple((2, r) for r in range(13, 17))


def test_non_targeting_cannot_enter_below_alpha():
    cm = CostModel(inter_cost=3.0)
    model = make_uniform_model(3, 12)
    order = order_neighborhoods(model)
    plan = non_targeting(model, order, 2.0, cm)
    assert plan.num_visits == 0
    assert plan.total_cost == 0.0
    assert plan.visits == ()


def test_non_targeting_exact_budget_covers_first_m():
    cm = CostModel(inter_cost=3.0)
    model = make_uniform_model(50, 12)
    order = order_neighborhoods(model)
    for m in (1, 5, 10):
        budget = budget_for_neighborhoods(model, order, m, cm)
        plan = non_targeting(model, order, budget, cm)
        assert plan.num_visits == m * 12
        assert plan.total_cost == budget
        visited_nbs = {nb for nb, _ in plan.visits}
        assert visited_nbs == set(order.ids[:m])


def test_hpt_equals_non_targeting_on_homogeneous_city():
    cm = CostModel(inter_cost=3.0)
    model = make_uniform_model(50, 12, fraction=0.2)
    order = order_neighborhoods(model)
    budget = budget_for_neighborhoods(model, order, 5, cm)
    targeted = hpt(model, order, budget, cm)
    baseline = non_targeting(model, order, budget, cm)
    assert set(targeted.visits) == set(baseline.visits)
    assert targeted.visited_high_risk == baseline.visited_high_risk == 60
    assert targeted.visited_low_risk == 0


def test_hpt_skips_empty_neighborhood_at_zero_cost():
    model = make_model([3, 4, 1, 2], (2, 2), 0.5)
    order = order_neighborhoods(model, key=OrderingKey.PRIOR_EVICTIONS,
                                prior_evictions=[10.0, 0.0])
    assert order.ids == (1, 2)
    plan = hpt(model, order, 4.0, CostModel(inter_cost=3.0))
    assert plan.visits == ((2, 1), (2, 2))
    assert plan.total_cost == 4.0
    assert plan.visited_high_risk == 2


def test_hpt_two_neighborhood_trace():
    # A holds 2 High-Risk, B holds 1; alpha=3, budget=7 buys all three
    model = make_model([1, 2, 4, 3, 5, 6], (3, 3), 0.5)
    order = order_neighborhoods(model)
    plan = hpt(model, order, 7.0, CostModel(inter_cost=3.0))
    assert plan.visits == ((1, 1), (1, 2), (2, 3))
    assert plan.total_cost == 7.0
    assert plan.visited_high_risk == 3
    assert plan.visited_low_risk == 0


def test_hpt_partial_budget_takes_ascending_ranks():
    model = make_model([1, 2, 4, 3, 5, 6], (3, 3), 0.5)
    order = order_neighborhoods(model)
    plan = hpt(model, order, 4.5, CostModel(inter_cost=3.0))
    assert plan.visits == ((1, 1), (1, 2))
    assert plan.total_cost == 4.0


def test_tpt_examples():
    cm = CostModel(inter_cost=3.0)
    one_nb = make_uniform_model(2, 3, fraction=0.5)
    plan = tpt(one_nb, 2.0, cm)
    assert plan.num_visits == 0 and plan.total_cost == 0.0
    plan = tpt(one_nb, 5.0, cm)
    assert plan.visits == ((1, 1), (1, 2), (1, 3))
    assert plan.total_cost == 5.0
    spread = make_uniform_model(3, 2, fraction=0.5, r=np.array([1, 4, 2, 5, 3, 6]))
    plan = tpt(spread, 5.0, cm)
    assert plan.visits == ((1, 1),)
    assert plan.total_cost == 3.0


def test_tpt_groups_by_descending_count():
    # top 5 ranks: three in neighborhood 2, two in neighborhood 1
    model = make_model([1, 3, 6, 2, 4, 5, 7, 8, 9], (3, 3, 3), 0.5)
    plan = tpt(model, 100.0, CostModel(inter_cost=3.0))
    nbs = [nb for nb, _ in plan.visits]
    assert nbs == sorted(nbs, key=lambda b: (-nbs.count(b), b))
    ranks = sorted(r for _, r in plan.visits)
    assert ranks == list(range(1, 10))


def test_tpt_matches_linear_scan():
    rng = np.random.default_rng(61)
    for _ in range(100):
        model, cm, budget = random_instance(rng)
        nb_of_rank = model.neighborhood_of_rank()

        def cost_of_top(k):
            if k == 0:
                return 0.0
            nbs = nb_of_rank[:k]
            distinct = len(set(nbs.tolist()))
            return distinct * cm.inter_cost + (k - distinct) * cm.intra_cost

        # strict cost monotonicity in k justifies the binary search
        costs = [cost_of_top(k) for k in range(model.total + 1)]
        assert all(b > a for a, b in zip(costs, costs[1:]))
        k_star = max(k for k in range(model.total + 1) if costs[k] <= budget)
        plan = tpt(model, budget, cm)
        assert plan.num_visits == k_star
        assert sorted(r for _, r in plan.visits) == list(range(1, k_star + 1))
        assert plan.total_cost == pytest.approx(costs[k_star])


def test_all_policies_respect_budget_and_route_cost():
    rng = np.random.default_rng(67)
    for _ in range(60):
        model, cm, budget = random_instance(rng)
        order = order_neighborhoods(model)
        for plan in (non_targeting(model, order, budget, cm),
                     hpt(model, order, budget, cm),
                     tpt(model, budget, cm)):
            assert plan.total_cost <= budget + 1e-9
            assert plan.total_cost == pytest.approx(route_cost(plan.visits, cm))
            assert plan.visited_high_risk + plan.visited_low_risk == plan.num_visits
            cutoff = model.high_risk_cutoff_rank
            assert plan.visited_high_risk == sum(1 for _, r in plan.visits if r <= cutoff)
            assert len(set(plan.visits)) == plan.num_visits


def test_hpt_dominates_non_targeting_on_high_risk():
    rng = np.random.default_rng(71)
    for _ in range(100):
        model, cm, budget = random_instance(rng)
        order = order_neighborhoods(model)
        assert (hpt(model, order, budget, cm).visited_high_risk
                >= non_targeting(model, order, budget, cm).visited_high_risk)


def test_policies_are_deterministic():
    rng = np.random.default_rng(73)
    for _ in range(20):
        model, cm, budget = random_instance(rng)
        order = order_neighborhoods(model)
        assert non_targeting(model, order, budget, cm) == non_targeting(model, order, budget, cm)
        assert hpt(model, order, budget, cm) == hpt(model, order, budget, cm)
        assert tpt(model, budget, cm) == tpt(model, budget, cm)


def test_negative_budget_rejected():
    model = make_uniform_model(2, 3)
    order = order_neighborhoods(model)
    cm = CostModel(inter_cost=3.0)
    for policy in (lambda: non_targeting(model, order, -1.0, cm),
                   lambda: hpt(model, order, -1.0, cm),
                   lambda: tpt(model, -1.0, cm)):
        with pytest.raises(ValueError):
            policy()
