"""Map a sampled ranking onto neighborhoods and measure risk concentration.

Neighborhood b receives the b-th consecutive slice of the ranking, so under
the identity center the n riskiest properties sit in neighborhood 1, the next
n in neighborhood 2, and so on. Properties ranked at or above the cutoff are
High-Risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rankings import as_ranking


@dataclass(frozen=True)
class CityConfig:
    """City layout: N neighborhoods, uniform or explicit sizes, High-Risk fraction."""

    num_neighborhoods: int
    properties_per: int | None = None
    neighborhood_sizes: tuple[int, ...] | None = None
    high_risk_fraction: float = 0.2

    def __post_init__(self):
        if self.num_neighborhoods < 1:
            raise ValueError("num_neighborhoods must be >= 1")
        if (self.properties_per is None) == (self.neighborhood_sizes is None):
            raise ValueError("give exactly one of properties_per or neighborhood_sizes")
        if self.properties_per is not None and self.properties_per < 1:
            raise ValueError("properties_per must be >= 1")
        if self.neighborhood_sizes is not None:
            sizes = tuple(int(s) for s in self.neighborhood_sizes)
            if len(sizes) != self.num_neighborhoods:
                raise ValueError("neighborhood_sizes length must equal num_neighborhoods")
            if any(s < 1 for s in sizes):
                raise ValueError("every neighborhood size must be >= 1")
            object.__setattr__(self, "neighborhood_sizes", sizes)
        if not 0.0 < self.high_risk_fraction <= 1.0:
            raise ValueError(f"high_risk_fraction must lie in (0, 1], got {self.high_risk_fraction}")

    def sizes(self) -> np.ndarray:
        if self.properties_per is not None:
            return np.full(self.num_neighborhoods, self.properties_per, dtype=np.int64)
        return np.asarray(self.neighborhood_sizes, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.sizes().sum())

    @property
    def high_risk_cutoff(self) -> int:
        # round half up so the cutoff is a deterministic integer count
        return int(math.floor(self.high_risk_fraction * self.total + 0.5))


@dataclass
class CityModel:
    """A realized city: per-neighborhood rank lists plus the High-Risk cutoff.

    assignment[b] holds the ranks in neighborhood b+1 in ranking-slot order;
    neighborhood ids are 1-based. risk_scores, when present, is indexed by
    rank-1 and must be descending (rank 1 = highest score). labels carries
    external neighborhood names for ingested data.
    """

    config: CityConfig
    assignment: list[np.ndarray]
    high_risk_cutoff_rank: int
    risk_scores: np.ndarray | None = None
    labels: list[str] | None = None

    @property
    def num_neighborhoods(self) -> int:
        return len(self.assignment)

    @property
    def total(self) -> int:
        return int(sum(a.size for a in self.assignment))

    def is_high_risk(self, rank: int) -> bool:
        return rank <= self.high_risk_cutoff_rank

    def neighborhood_of_rank(self) -> np.ndarray:
        """1-based neighborhood id for every rank, indexed by rank-1."""
        nb = np.empty(self.total, dtype=np.int64)
        for b, ranks in enumerate(self.assignment, start=1):
            nb[ranks - 1] = b
        return nb

    def label(self, neighborhood_id: int) -> str:
        if self.labels is not None:
            return self.labels[neighborhood_id - 1]
        return str(neighborhood_id)


@dataclass(frozen=True)
class NeighborhoodStats:
    high_risk_counts: np.ndarray
    totals: np.ndarray

    @property
    def high_risk_rates(self) -> np.ndarray:
        return self.high_risk_counts / self.totals


def homogeneous_central_ranking(num_neighborhoods: int, properties_per: int) -> np.ndarray:
    """Identity permutation of length N*n: block b covers ranks (b-1)n+1 .. bn."""
    if num_neighborhoods < 1 or properties_per < 1:
        raise ValueError("counts must be >= 1")
    return np.arange(1, num_neighborhoods * properties_per + 1, dtype=np.int64)


def assign_to_neighborhoods(r, config: CityConfig) -> CityModel:
    """Slice the ranking into consecutive neighborhood blocks."""
    rr = as_ranking(r)
    sizes = config.sizes()
    if rr.size != sizes.sum():
        raise ValueError(f"ranking length {rr.size} does not match the city total {sizes.sum()}")
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    assignment = [rr[bounds[b]:bounds[b + 1]].copy() for b in range(config.num_neighborhoods)]
    return CityModel(
        config=config,
        assignment=assignment,
        high_risk_cutoff_rank=config.high_risk_cutoff,
    )


def neighborhood_stats(model: CityModel) -> NeighborhoodStats:
    cutoff = model.high_risk_cutoff_rank
    counts = np.array([int((ranks <= cutoff).sum()) for ranks in model.assignment], dtype=np.int64)
    totals = np.array([ranks.size for ranks in model.assignment], dtype=np.int64)
    return NeighborhoodStats(high_risk_counts=counts, totals=totals)


def gini_index(values) -> float:
    """G = sum_ij |x_i - x_j| / (2 N^2 mean); 0 = equal, (N-1)/N = one holder."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("values must be a nonempty 1-D sequence")
    if np.any(x < 0):
        raise ValueError("values must be nonnegative")
    total = x.sum()
    if total == 0:
        raise ValueError("gini is undefined when all values are zero")
    n = x.size
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * n * total))
