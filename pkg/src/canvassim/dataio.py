"""CSV ingestion of property tables, atomic result emission, and manifests.

Input schema (header required, last two columns optional):
property_id,neighborhood_id,risk_score,high_risk,evicted,prior_evictions_neighborhood
"""

from __future__ import annotations

import csv
import logging
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .city import CityConfig, CityModel
from .calibration import ObservedNeighborhoodProfile
from .policies import CanvassPlan, CostModel

log = logging.getLogger(__name__)

SCHEMA = ("property_id", "neighborhood_id", "risk_score", "high_risk",
          "evicted", "prior_evictions_neighborhood")


@dataclass(frozen=True)
class PropertyRecord:
    property_id: str
    neighborhood_id: str
    risk_score: float
    high_risk: int
    evicted: int | None = None
    prior_evictions: int | None = None


@dataclass
class LoadResult:
    model: CityModel
    profile: ObservedNeighborhoodProfile
    evicted: np.ndarray | None  # eviction bit per property, indexed by rank-1
    dropped_neighborhoods: int
    dropped_properties: int


def _parse_bit(raw: str, line_no: int, column: str) -> int:
    if raw not in ("0", "1"):
        raise ValueError(f"line {line_no}: {column} must be 0 or 1, got {raw!r}")
    return int(raw)


def parse_property_csv(path) -> list[PropertyRecord]:
    """Read and validate rows; errors carry the offending line number."""
    records = []
    seen_ids = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(header) not in (SCHEMA[:4], SCHEMA[:5], SCHEMA):
            raise ValueError(f"{path}: header must be a prefix of {','.join(SCHEMA)}")
        n_cols = len(header)
        for line_no, row in enumerate(reader, start=2):
            if len(row) != n_cols:
                raise ValueError(f"line {line_no}: expected {n_cols} columns, got {len(row)}")
            pid, nb = row[0], row[1]
            if not pid or not nb:
                raise ValueError(f"line {line_no}: property_id and neighborhood_id must be nonempty")
            if pid in seen_ids:
                raise ValueError(f"line {line_no}: duplicate property_id {pid!r}")
            seen_ids.add(pid)
            try:
                score = float(row[2])
            except ValueError:
                raise ValueError(f"line {line_no}: risk_score is not a number: {row[2]!r}") from None
            if not math.isfinite(score):
                raise ValueError(f"line {line_no}: risk_score must be finite")
            hr = _parse_bit(row[3], line_no, "high_risk")
            ev = _parse_bit(row[4], line_no, "evicted") if n_cols >= 5 else None
            if n_cols == 6:
                try:
                    prior = int(row[5])
                except ValueError:
                    raise ValueError(f"line {line_no}: prior_evictions_neighborhood must be an integer") from None
                if prior < 0:
                    raise ValueError(f"line {line_no}: prior_evictions_neighborhood must be >= 0")
            else:
                prior = None
            records.append(PropertyRecord(pid, nb, score, hr, ev, prior))
    if not records:
        raise ValueError(f"{path}: no property rows")
    return records


def load_properties(path, min_neighborhood_size: int = 30) -> LoadResult:
    """Build the CityModel and neighborhood profile from a property table.

    Neighborhoods with fewer than min_neighborhood_size properties are
    dropped. Ranks follow descending risk_score, ties broken by property_id;
    the High-Risk cutoff is the number of labeled High-Risk properties.
    """
    records = parse_property_csv(path)
    by_nb: dict[str, list[PropertyRecord]] = {}
    for rec in records:
        by_nb.setdefault(rec.neighborhood_id, []).append(rec)

    kept = {nb: rows for nb, rows in by_nb.items() if len(rows) >= min_neighborhood_size}
    dropped_nb = len(by_nb) - len(kept)
    dropped_props = sum(len(rows) for nb, rows in by_nb.items() if nb not in kept)
    if dropped_nb:
        log.info("dropped %d neighborhoods (%d properties) under size %d",
                 dropped_nb, dropped_props, min_neighborhood_size)
    if not kept:
        raise ValueError(f"{path}: no neighborhood meets the size threshold {min_neighborhood_size}")

    labels = sorted(kept)
    retained = [rec for nb in labels for rec in kept[nb]]
    ranked = sorted(retained, key=lambda rec: (-rec.risk_score, rec.property_id))
    rank_of_id = {rec.property_id: rank for rank, rec in enumerate(ranked, start=1)}
    total = len(ranked)
    cutoff = sum(rec.high_risk for rec in ranked)
    if cutoff == 0:
        raise ValueError(f"{path}: no High-Risk properties in the data")

    mismatched = sum(1 for rank, rec in enumerate(ranked, start=1)
                     if rec.high_risk != (1 if rank <= cutoff else 0))
    if mismatched:
        log.warning("%d high_risk labels disagree with the score-rank cutoff %d", mismatched, cutoff)

    assignment = []
    prior_per_nb = []
    hr_counts = []
    have_prior = records[0].prior_evictions is not None
    for nb in labels:
        rows = kept[nb]
        ranks = np.sort(np.array([rank_of_id[rec.property_id] for rec in rows], dtype=np.int64))
        assignment.append(ranks)
        hr_counts.append(sum(rec.high_risk for rec in rows))
        if have_prior:
            values = {rec.prior_evictions for rec in rows}
            if len(values) != 1:
                raise ValueError(f"neighborhood {nb!r}: inconsistent prior_evictions_neighborhood values")
            prior_per_nb.append(values.pop())

    config = CityConfig(
        num_neighborhoods=len(labels),
        neighborhood_sizes=tuple(len(kept[nb]) for nb in labels),
        high_risk_fraction=cutoff / total,
    )
    scores = np.empty(total)
    for rank, rec in enumerate(ranked, start=1):
        scores[rank - 1] = rec.risk_score
    model = CityModel(
        config=config,
        assignment=assignment,
        high_risk_cutoff_rank=cutoff,
        risk_scores=scores,
        labels=list(labels),
    )
    profile = ObservedNeighborhoodProfile(
        high_risk_counts=tuple(hr_counts),
        totals=tuple(len(kept[nb]) for nb in labels),
        prior_evictions=tuple(prior_per_nb) if have_prior else None,
        labels=tuple(labels),
    )
    have_evicted = records[0].evicted is not None
    evicted = None
    if have_evicted:
        evicted = np.zeros(total, dtype=np.int64)
        for rank, rec in enumerate(ranked, start=1):
            evicted[rank - 1] = rec.evicted
    return LoadResult(
        model=model,
        profile=profile,
        evicted=evicted,
        dropped_neighborhoods=dropped_nb,
        dropped_properties=dropped_props,
    )


def records_from_model(model: CityModel, evicted=None, prior_evictions=None) -> list[PropertyRecord]:
    """Flatten a CityModel into schema records, in global rank order.

    Missing risk scores get the deterministic surrogate 1 - rank/(total+1).
    """
    total = model.total
    scores = model.risk_scores
    if scores is None:
        scores = 1.0 - np.arange(1, total + 1) / (total + 1.0)
    nb_of_rank = model.neighborhood_of_rank()
    width = len(str(total))
    # zero-pad synthetic labels so lexicographic order matches id order
    nb_width = len(str(model.num_neighborhoods))
    records = []
    for rank in range(1, total + 1):
        nb = int(nb_of_rank[rank - 1])
        nb_label = model.label(nb) if model.labels is not None else f"n{nb:0{nb_width}d}"
        records.append(PropertyRecord(
            property_id=f"p{rank:0{width}d}",
            neighborhood_id=nb_label,
            risk_score=float(scores[rank - 1]),
            high_risk=1 if rank <= model.high_risk_cutoff_rank else 0,
            evicted=None if evicted is None else int(evicted[rank - 1]),
            prior_evictions=None if prior_evictions is None else int(prior_evictions[nb - 1]),
        ))
    return records


def _atomic_write(path, text: str):
    # temp file + rename so interrupted runs never leave truncated outputs
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt_value(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_value(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_property_csv(path, records: list[PropertyRecord]):
    have_evicted = any(rec.evicted is not None for rec in records)
    have_prior = any(rec.prior_evictions is not None for rec in records)
    n_cols = 6 if have_prior else (5 if have_evicted else 4)
    header = SCHEMA[:n_cols]
    rows = []
    for rec in records:
        row = [rec.property_id, rec.neighborhood_id, fmt_value(rec.risk_score), str(rec.high_risk)]
        if n_cols >= 5:
            row.append("" if rec.evicted is None else str(rec.evicted))
        if n_cols == 6:
            row.append("" if rec.prior_evictions is None else str(rec.prior_evictions))
        rows.append(row)
    write_csv(path, header, rows)


def write_city_csv(path, model: CityModel):
    """Debug snapshot: one row per property with its neighborhood and risk status."""
    nb_of_rank = model.neighborhood_of_rank()
    rows = []
    for rank in range(1, model.total + 1):
        nb = int(nb_of_rank[rank - 1])
        score = None if model.risk_scores is None else float(model.risk_scores[rank - 1])
        rows.append((model.label(nb), rank, 1 if rank <= model.high_risk_cutoff_rank else 0, score))
    write_csv(path, ("neighborhood_id", "property_rank", "high_risk", "risk_score"), rows)


def write_plan_csv(path, plan: CanvassPlan, cutoff: int, cost_model: CostModel):
    """Audit trail of a plan: visit order with cumulative routing cost."""
    rows = []
    cost = 0.0
    prev_nb = None
    for i, (nb, rank) in enumerate(plan.visits):
        cost += cost_model.inter_cost if nb != prev_nb else cost_model.intra_cost
        prev_nb = nb
        rows.append((i, nb, rank, 1 if rank <= cutoff else 0, cost))
    write_csv(path, ("visit_index", "neighborhood_id", "property_rank", "high_risk", "cumulative_cost"), rows)


def write_manifest(path, params: dict):
    lines = [f"{key}={fmt_value(params[key])}" for key in sorted(params)]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                out[key] = value
    return out
