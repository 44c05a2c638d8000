"""Property-table ingestion, model round-trips, and output writing."""

import logging
import os

import numpy as np
import pytest

from canvassim.city import (
    CityConfig,
    assign_to_neighborhoods,
    homogeneous_central_ranking,
    neighborhood_stats,
)
from canvassim.dataio import (
    PropertyRecord,
    load_properties,
    parse_property_csv,
    read_manifest,
    records_from_model,
    write_city_csv,
    write_csv,
    write_manifest,
    write_plan_csv,
    write_property_csv,
)
from canvassim.policies import CostModel, non_targeting, order_neighborhoods
from canvassim.rankings import MallowsParams, sample_rim


def write_text(path, text):
    path.write_text(text)
    return path


def small_table(tmp_path, rows, header="property_id,neighborhood_id,risk_score,high_risk"):
    body = "\n".join([header] + rows) + "\n"
    return write_text(tmp_path / "props.csv", body)


def test_parse_minimal_table(tmp_path):
    path = small_table(tmp_path, ["a,n1,0.9,1", "b,n1,0.5,0"])
    records = parse_property_csv(path)
    assert records == [
        PropertyRecord("a", "n1", 0.9, 1),
        PropertyRecord("b", "n1", 0.5, 0),
    ]


def test_parse_full_table(tmp_path):
    header = "property_id,neighborhood_id,risk_score,high_risk,evicted,prior_evictions_neighborhood"
    path = small_table(tmp_path, ["a,n1,0.9,1,1,4", "b,n2,0.5,0,0,0"], header=header)
    records = parse_property_csv(path)
    assert records[0].evicted == 1 and records[0].prior_evictions == 4
    assert records[1].evicted == 0 and records[1].prior_evictions == 0


def test_parse_errors_carry_line_numbers(tmp_path):
    cases = [
        (["a,n1,0.9,1", "b,n1,0.5"], "line 3"),
        (["a,n1,zap,1"], "line 2: risk_score"),
        (["a,n1,inf,1"], "line 2: risk_score must be finite"),
        (["a,n1,0.9,2"], "line 2: high_risk"),
        (["a,n1,0.9,1", "a,n2,0.5,0"], "line 3: duplicate property_id"),
        ([",n1,0.9,1"], "line 2"),
    ]
    for rows, fragment in cases:
        path = small_table(tmp_path, rows)
        with pytest.raises(ValueError, match=fragment):
            parse_property_csv(path)


def test_parse_prior_eviction_errors(tmp_path):
    header = "property_id,neighborhood_id,risk_score,high_risk,evicted,prior_evictions_neighborhood"
    path = small_table(tmp_path, ["a,n1,0.9,1,0,x"], header=header)
    with pytest.raises(ValueError, match="line 2"):
        parse_property_csv(path)
    path = small_table(tmp_path, ["a,n1,0.9,1,0,-2"], header=header)
    with pytest.raises(ValueError, match=">= 0"):
        parse_property_csv(path)


def test_parse_header_and_empty_file_errors(tmp_path):
    with pytest.raises(ValueError, match="header"):
        parse_property_csv(small_table(tmp_path, ["a,n1,0.9"], header="id,nb,score"))
    with pytest.raises(ValueError, match="empty"):
        parse_property_csv(write_text(tmp_path / "empty.csv", ""))
    with pytest.raises(ValueError, match="no property rows"):
        parse_property_csv(small_table(tmp_path, []))


def synthetic_rows(sizes, scores=None):
    rows = []
    idx = 0
    for nb, size in enumerate(sizes, start=1):
        for k in range(size):
            idx += 1
            score = scores[idx - 1] if scores is not None else 1.0 - idx / (sum(sizes) + 1)
            rows.append(f"p{idx:03d},n{nb},{score!r},0")
    return rows


def test_load_drops_small_neighborhoods(tmp_path):
    rows = synthetic_rows([40, 35, 10])
    # mark the top 15 scores High-Risk
    rows = [r.replace(",0", ",1") if int(r[1:4]) <= 15 else r for r in rows]
    result = load_properties(small_table(tmp_path, rows))
    assert result.dropped_neighborhoods == 1
    assert result.dropped_properties == 10
    assert result.model.num_neighborhoods == 2
    assert result.model.total == 75
    assert result.profile.labels == ("n1", "n2")

    kept_all = load_properties(small_table(tmp_path, rows), min_neighborhood_size=1)
    assert kept_all.model.num_neighborhoods == 3
    assert kept_all.dropped_neighborhoods == 0


def test_load_requires_a_qualifying_neighborhood(tmp_path):
    rows = ["a,n1,0.9,1", "b,n2,0.5,0"]
    with pytest.raises(ValueError, match="size threshold"):
        load_properties(small_table(tmp_path, rows), min_neighborhood_size=5)


def test_load_requires_high_risk_labels(tmp_path):
    path = small_table(tmp_path, ["a,n1,0.9,0", "b,n1,0.5,0"])
    with pytest.raises(ValueError, match="High-Risk"):
        load_properties(path, min_neighborhood_size=1)


def test_load_ranks_by_score_then_id(tmp_path):
    rows = [
        "d,n1,0.5,0",
        "a,n1,0.9,1",
        "c,n1,0.7,0",
        "b,n1,0.7,1",
    ]
    result = load_properties(small_table(tmp_path, rows), min_neighborhood_size=1)
    # descending score, ties by property_id: a(1), b(2), c(3), d(4)
    assert np.array_equal(result.model.risk_scores, [0.9, 0.7, 0.7, 0.5])
    assert result.model.high_risk_cutoff_rank == 2
    assert list(result.model.assignment[0]) == [1, 2, 3, 4]


def test_load_warns_on_label_rank_mismatch(tmp_path, caplog):
    rows = [
        "a,n1,0.9,0",  # top score labeled Low-Risk
        "b,n1,0.5,1",
        "c,n1,0.4,0",
    ]
    with caplog.at_level(logging.WARNING, logger="canvassim.dataio"):
        result = load_properties(small_table(tmp_path, rows), min_neighborhood_size=1)
    assert result.model.high_risk_cutoff_rank == 1
    assert any("disagree" in rec.message for rec in caplog.records)


def test_load_prior_evictions(tmp_path):
    header = "property_id,neighborhood_id,risk_score,high_risk,evicted,prior_evictions_neighborhood"
    rows = ["a,n1,0.9,1,1,7", "b,n1,0.6,0,0,7", "c,n2,0.5,0,1,2", "d,n2,0.4,0,0,2"]
    result = load_properties(small_table(tmp_path, rows, header=header), min_neighborhood_size=1)
    assert result.profile.prior_evictions == (7, 2)
    assert np.array_equal(result.evicted, [1, 0, 1, 0])

    rows[1] = "b,n1,0.6,0,0,8"
    with pytest.raises(ValueError, match="inconsistent"):
        load_properties(small_table(tmp_path, rows, header=header), min_neighborhood_size=1)


def test_round_trip_preserves_city_structure(tmp_path):
    config = CityConfig(num_neighborhoods=12, properties_per=9, high_risk_fraction=0.25)
    center = homogeneous_central_ranking(12, 9)
    rng = np.random.default_rng(71)
    r = sample_rim(MallowsParams(center=center, phi=0.9), rng)
    model = assign_to_neighborhoods(r, config)
    evicted = rng.integers(0, 2, size=model.total)
    prior = rng.integers(0, 10, size=12)

    path = tmp_path / "city.csv"
    write_property_csv(path, records_from_model(model, evicted=evicted, prior_evictions=prior))
    result = load_properties(path, min_neighborhood_size=1)

    assert result.model.high_risk_cutoff_rank == model.high_risk_cutoff_rank
    assert result.model.total == model.total
    reloaded = [set(a.tolist()) for a in result.model.assignment]
    original = [set(a.tolist()) for a in model.assignment]
    assert reloaded == original
    assert np.array_equal(result.evicted, evicted)
    assert result.profile.prior_evictions == tuple(prior)
    orig_stats = neighborhood_stats(model)
    assert result.profile.high_risk_counts == tuple(orig_stats.high_risk_counts)
    # surrogate scores are strictly descending in rank, so ranks survive the trip
    assert np.all(np.diff(result.model.risk_scores) < 0)


def test_records_from_model_fields():
    config = CityConfig(num_neighborhoods=3, properties_per=2, high_risk_fraction=0.5)
    model = assign_to_neighborhoods([4, 1, 5, 2, 6, 3], config)
    records = records_from_model(model)
    assert [rec.property_id for rec in records] == ["p1", "p2", "p3", "p4", "p5", "p6"]
    assert [rec.neighborhood_id for rec in records] == ["n1", "n2", "n3", "n1", "n2", "n3"]
    assert [rec.high_risk for rec in records] == [1, 1, 1, 0, 0, 0]
    assert all(rec.evicted is None and rec.prior_evictions is None for rec in records)
    scores = [rec.risk_score for rec in records]
    assert scores == sorted(scores, reverse=True)


def test_write_csv_formats_na_and_is_atomic(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(path, ("a", "b"), [(1, None), (2.5, "x")])
    assert path.read_text() == "a,b\n1,NA\n2.5,x\n"
    assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []


def test_write_plan_csv_tracks_cumulative_cost(tmp_path):
    config = CityConfig(num_neighborhoods=3, properties_per=4, high_risk_fraction=0.25)
    model = assign_to_neighborhoods(homogeneous_central_ranking(3, 4), config)
    order = order_neighborhoods(model)
    cm = CostModel(inter_cost=3.0)
    plan = non_targeting(model, order, 10.0, cm)
    path = tmp_path / "plan.csv"
    write_plan_csv(path, plan, model.high_risk_cutoff_rank, cm)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "visit_index,neighborhood_id,property_rank,high_risk,cumulative_cost"
    assert len(lines) == plan.num_visits + 1
    assert float(lines[-1].split(",")[-1]) == plan.total_cost


def test_write_city_csv(tmp_path):
    config = CityConfig(num_neighborhoods=2, properties_per=3, high_risk_fraction=0.5)
    model = assign_to_neighborhoods([1, 2, 3, 4, 5, 6], config)
    path = tmp_path / "city.csv"
    write_city_csv(path, model)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 7
    assert lines[1].split(",") == ["1", "1", "1", "NA"]


def test_manifest_round_trip(tmp_path):
    path = tmp_path / "manifest.txt"
    write_manifest(path, {"seed": 7, "phi": 0.99, "policy": "hpt", "note": None})
    text = path.read_text()
    # keys are written sorted for stable diffs
    assert text.splitlines() == ["note=NA", "phi=0.99", "policy=hpt", "seed=7"]
    assert read_manifest(path) == {"note": "NA", "phi": "0.99", "policy": "hpt", "seed": "7"}
