"""Fit the dispersion parameter to observed neighborhood profiles and
calibrate raw risk scores into probabilities.

Two phi procedures: the envelope method (observed rank-ordered High-Risk
rates must fall inside simulated per-rank min/max ranges; smallest covering
phi wins) and Gini matching (invert the simulated mean-Gini curve at the
observed Gini). Score calibration offers Platt scaling and isotonic
regression plus reliability-curve binning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .city import CityConfig, gini_index
from .rankings import MallowsParams, sample_rim


class CalibrationMethod(Enum):
    ENVELOPE = "envelope"
    GINI_MATCH = "gini_match"


@dataclass(frozen=True)
class ObservedNeighborhoodProfile:
    """Per-neighborhood High-Risk counts and totals, labels optional."""

    high_risk_counts: tuple[int, ...]
    totals: tuple[int, ...]
    prior_evictions: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.high_risk_counts) != len(self.totals) or not self.totals:
            raise ValueError("counts and totals must be nonempty and equal-length")
        if any(t < 1 for t in self.totals):
            raise ValueError("every neighborhood total must be >= 1")
        if any(not 0 <= c <= t for c, t in zip(self.high_risk_counts, self.totals)):
            raise ValueError("High-Risk counts must lie in [0, total]")

    @property
    def num_neighborhoods(self) -> int:
        return len(self.totals)

    @property
    def high_risk_fraction(self) -> float:
        return sum(self.high_risk_counts) / sum(self.totals)

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.high_risk_counts) / np.asarray(self.totals)


@dataclass(frozen=True)
class PhiEstimate:
    phi: float
    method: CalibrationMethod
    found: bool
    diagnostics: dict = field(compare=False, default_factory=dict)


@dataclass(frozen=True)
class GiniCurvePoint:
    phi: float
    mean_gini: float
    min_gini: float
    max_gini: float


def _neighborhood_of_slot(config: CityConfig) -> np.ndarray:
    return np.repeat(np.arange(config.num_neighborhoods), config.sizes())


def _draw_counts(config, nb_of_slot, cutoff, phi, rng) -> np.ndarray:
    # High-Risk count per neighborhood for one sampled city
    center = np.arange(1, config.total + 1, dtype=np.int64)
    r = sample_rim(MallowsParams(center=center, phi=phi), rng)
    return np.bincount(nb_of_slot[r <= cutoff], minlength=config.num_neighborhoods)


@lru_cache(maxsize=64)
def _simulate_gini_table(config: CityConfig, phi_grid: tuple, samples: int, base_seed: int):
    """(means, mins, maxs) of the count Gini per grid phi; cached so repeated
    calibrations against one grid share a single simulation pass."""
    nb_of_slot = _neighborhood_of_slot(config)
    cutoff = config.high_risk_cutoff
    means = np.empty(len(phi_grid))
    mins = np.empty(len(phi_grid))
    maxs = np.empty(len(phi_grid))
    for j, phi in enumerate(phi_grid):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=base_seed, spawn_key=(j,)))
        ginis = np.empty(samples)
        for s in range(samples):
            ginis[s] = gini_index(_draw_counts(config, nb_of_slot, cutoff, phi, rng))
        # correctly rounded mean: a degenerate phi keeps the closed-form value
        means[j] = math.fsum(ginis) / samples
        mins[j], maxs[j] = ginis.min(), ginis.max()
    for arr in (means, mins, maxs):
        arr.flags.writeable = False
    return means, mins, maxs


@lru_cache(maxsize=64)
def _simulate_rate_envelope(config: CityConfig, phi_grid: tuple, n_sims: int, base_seed: int):
    """Per-rank [min, max] of descending-sorted High-Risk rates, per grid phi."""
    nb_of_slot = _neighborhood_of_slot(config)
    cutoff = config.high_risk_cutoff
    sizes = config.sizes().astype(np.float64)
    n_phi, n_ranks = len(phi_grid), config.num_neighborhoods
    lo = np.full((n_phi, n_ranks), np.inf)
    hi = np.full((n_phi, n_ranks), -np.inf)
    for j, phi in enumerate(phi_grid):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=base_seed, spawn_key=(j,)))
        for _ in range(n_sims):
            rates = np.sort(_draw_counts(config, nb_of_slot, cutoff, phi, rng) / sizes)[::-1]
            np.minimum(lo[j], rates, out=lo[j])
            np.maximum(hi[j], rates, out=hi[j])
    lo.flags.writeable = False
    hi.flags.writeable = False
    return lo, hi


def gini_curve(config: CityConfig, phi_grid, samples: int, base_seed: int) -> list[GiniCurvePoint]:
    """Monte Carlo mean/min/max of the High-Risk count Gini at each phi."""
    grid = tuple(float(p) for p in phi_grid)
    if not grid:
        raise ValueError("phi_grid must be nonempty")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    means, mins, maxs = _simulate_gini_table(config, grid, samples, base_seed)
    return [
        GiniCurvePoint(phi=grid[j], mean_gini=float(means[j]), min_gini=float(mins[j]), max_gini=float(maxs[j]))
        for j in range(len(grid))
    ]


def _simulation_config(profile: ObservedNeighborhoodProfile, properties_per: int) -> CityConfig:
    # calibration simulates uniform-size neighborhoods; observed data enters as rates
    return CityConfig(
        num_neighborhoods=profile.num_neighborhoods,
        properties_per=properties_per,
        high_risk_fraction=profile.high_risk_fraction,
    )


def calibrate_phi_envelope(
    profile: ObservedNeighborhoodProfile,
    phi_grid,
    n_sims: int,
    base_seed: int,
    properties_per: int = 100,
) -> PhiEstimate:
    """Smallest grid phi whose simulated per-rank rate envelope covers the profile.

    Ranks are formed by sorting neighborhoods by High-Risk rate, descending.
    When no phi covers every rank, the result carries the best coverage seen
    and is flagged not found.
    """
    grid = tuple(sorted(float(p) for p in phi_grid))
    if not grid:
        raise ValueError("phi_grid must be nonempty")
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    config = _simulation_config(profile, properties_per)
    lo, hi = _simulate_rate_envelope(config, grid, n_sims, base_seed)
    observed = np.sort(profile.rates)[::-1]
    eps = 1e-12
    uncovered: dict[float, tuple[int, ...]] = {}
    best_phi, best_missing = grid[0], profile.num_neighborhoods + 1
    for j, phi in enumerate(grid):
        misses = np.flatnonzero((observed < lo[j] - eps) | (observed > hi[j] + eps))
        uncovered[phi] = tuple(int(r) for r in misses)
        if misses.size == 0:
            return PhiEstimate(
                phi=phi,
                method=CalibrationMethod.ENVELOPE,
                found=True,
                diagnostics={"uncovered_ranks": uncovered},
            )
        if misses.size < best_missing:
            best_phi, best_missing = phi, misses.size
    return PhiEstimate(
        phi=best_phi,
        method=CalibrationMethod.ENVELOPE,
        found=False,
        diagnostics={"uncovered_ranks": uncovered, "best_uncovered_count": best_missing},
    )


def calibrate_phi_gini(
    profile: ObservedNeighborhoodProfile,
    phi_grid,
    samples: int,
    base_seed: int,
    properties_per: int = 100,
) -> PhiEstimate:
    """Invert the simulated mean-Gini curve at the observed count Gini.

    Picks the grid phi whose mean Gini is nearest the observation and refines
    by linear interpolation inside the bracketing grid interval. Observations
    outside the simulated range return the nearest endpoint, flagged.
    """
    grid = tuple(sorted(float(p) for p in phi_grid))
    if not grid:
        raise ValueError("phi_grid must be nonempty")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    config = _simulation_config(profile, properties_per)
    means, _, _ = _simulate_gini_table(config, grid, samples, base_seed)
    g_obs = gini_index(np.asarray(profile.high_risk_counts, dtype=np.float64))

    def diag(fit):
        return {"observed_gini": g_obs, "fitted_mean_gini": fit, "residual": abs(fit - g_obs)}

    if g_obs < means.min() or g_obs > means.max():
        j = int(np.argmin(np.abs(means - g_obs)))
        return PhiEstimate(phi=grid[j], method=CalibrationMethod.GINI_MATCH,
                           found=False, diagnostics=diag(float(means[j])))
    j = int(np.argmin(np.abs(means - g_obs)))
    for a, b in ((j, j + 1), (j - 1, j)):
        if not 0 <= a < b < len(grid):
            continue
        lo, hi = sorted((means[a], means[b]))
        if lo <= g_obs <= hi:
            if means[b] == means[a]:
                phi = grid[a]
            else:
                t = (g_obs - means[a]) / (means[b] - means[a])
                phi = grid[a] + t * (grid[b] - grid[a])
            return PhiEstimate(phi=float(phi), method=CalibrationMethod.GINI_MATCH,
                               found=True, diagnostics=diag(g_obs))
    # in range overall but not bracketed next to the nearest point (noise wiggle)
    return PhiEstimate(phi=grid[j], method=CalibrationMethod.GINI_MATCH,
                       found=True, diagnostics=diag(float(means[j])))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class PlattCalibrator:
    slope: float
    intercept: float

    kind = "platt"

    def __call__(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        return _sigmoid(self.slope * s + self.intercept)


@dataclass(frozen=True)
class IsotonicCalibrator:
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    kind = "isotonic"

    def __call__(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        # step value at the largest breakpoint <= score, clamped at the ends
        idx = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, len(self.values) - 1)
        return np.asarray(self.values, dtype=np.float64)[idx]


def platt_scaling(scores, outcomes) -> PlattCalibrator:
    """Sigmoid fit of outcome on score with Platt's prior-corrected targets.

    Damped Newton on the cross-entropy; stops when the objective improves by
    less than 1e-10 or after 100 iterations.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(outcomes)
    if s.size != y.size:
        raise ValueError("scores and outcomes must have equal length")
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("outcomes must be 0/1 bits")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both outcome classes must be present for a Platt fit")
    # prior-corrected targets keep separable data from driving the slope to infinity
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def objective(a, b):
        z = a * s + b
        # -sum t log p + (1-t) log(1-p), written with softplus for stability
        return float(np.sum((1.0 - t) * z + np.logaddexp(0.0, -z)))

    if np.ptp(s) == 0.0:
        # intercept-only model: analytic optimum at the logit of the mean target
        tm = float(t.mean())
        return PlattCalibrator(slope=0.0, intercept=math.log(tm / (1.0 - tm)))

    a, b = 0.0, math.log((n_pos + 1.0) / (n_neg + 1.0))
    f = objective(a, b)
    for _ in range(100):
        p = _sigmoid(a * s + b)
        grad = np.array([np.sum((p - t) * s), np.sum(p - t)])
        w = p * (1.0 - p)
        h = np.array([
            [np.sum(w * s * s) + 1e-12, np.sum(w * s)],
            [np.sum(w * s), np.sum(w) + 1e-12],
        ])
        step = np.linalg.solve(h, grad)
        lam = 1.0
        while lam > 1e-10:
            fa, fb = a - lam * step[0], b - lam * step[1]
            f_new = objective(fa, fb)
            if f_new < f:
                break
            lam /= 2.0
        else:
            break  # no descent direction left
        a, b = fa, fb
        if f - f_new < 1e-10:
            f = f_new
            break
        f = f_new
    return PlattCalibrator(slope=float(a), intercept=float(b))


def isotonic_regression(scores, outcomes) -> IsotonicCalibrator:
    """Pool-adjacent-violators fit; ties in score are pre-pooled by mean.

    Returns the nondecreasing step function minimizing squared error to the
    outcomes among all monotone fits.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if s.size != y.size or s.size < 1:
        raise ValueError("scores and outcomes must be nonempty and equal-length")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("outcomes must lie in [0, 1]")
    xs, inverse = np.unique(s, return_inverse=True)
    weights = np.bincount(inverse).astype(np.float64)
    level = np.bincount(inverse, weights=y) / weights
    # stack of blocks (weight, weighted level); merge while order is violated
    blk_w: list[float] = []
    blk_wy: list[float] = []
    sizes: list[int] = []
    for w, ly in zip(weights, level):
        blk_w.append(w)
        blk_wy.append(w * ly)
        sizes.append(1)
        while len(blk_w) > 1 and blk_wy[-1] / blk_w[-1] < blk_wy[-2] / blk_w[-2]:
            blk_w[-2] += blk_w[-1]
            blk_wy[-2] += blk_wy[-1]
            sizes[-2] += sizes[-1]
            blk_w.pop(); blk_wy.pop(); sizes.pop()
    values = np.repeat([wy / w for w, wy in zip(blk_w, blk_wy)], sizes)
    return IsotonicCalibrator(breakpoints=tuple(float(x) for x in xs),
                              values=tuple(float(v) for v in values))


@dataclass(frozen=True)
class EqualFrequency:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("bin size must be >= 1")


@dataclass(frozen=True)
class EqualWidth:
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("bin count must be >= 1")


@dataclass(frozen=True)
class ReliabilityBin:
    bin_index: int
    mean_predicted: float
    empirical_rate: float
    count: int


def reliability_curve(predicted, outcomes, binning) -> list[ReliabilityBin]:
    """Per-bin mean predicted probability vs. empirical outcome rate, bins ordered by score."""
    p = np.asarray(predicted, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if p.size != y.size or p.size < 1:
        raise ValueError("predictions and outcomes must be nonempty and equal-length")
    rows = []
    if isinstance(binning, EqualFrequency):
        order = np.argsort(p, kind="stable")
        for i, start in enumerate(range(0, p.size, binning.size)):
            chunk = order[start:start + binning.size]
            rows.append(ReliabilityBin(
                bin_index=i,
                mean_predicted=float(p[chunk].mean()),
                empirical_rate=float(y[chunk].mean()),
                count=int(chunk.size),
            ))
    elif isinstance(binning, EqualWidth):
        lo, hi = float(p.min()), float(p.max())
        if hi == lo:
            idx = np.zeros(p.size, dtype=np.int64)
        else:
            idx = np.minimum(((p - lo) / (hi - lo) * binning.count).astype(np.int64), binning.count - 1)
        out_i = 0
        for b in range(binning.count):
            mask = idx == b
            if not mask.any():
                continue  # empty width bins are skipped
            rows.append(ReliabilityBin(
                bin_index=out_i,
                mean_predicted=float(p[mask].mean()),
                empirical_rate=float(y[mask].mean()),
                count=int(mask.sum()),
            ))
            out_i += 1
    else:
        raise ValueError(f"unknown binning: {binning!r}")
    return rows


def calibrator_to_text(cal) -> str:
    """Key-value serialization so a fitted calibrator can be reused across runs."""
    if isinstance(cal, PlattCalibrator):
        return f"kind=platt\nslope={cal.slope!r}\nintercept={cal.intercept!r}\n"
    if isinstance(cal, IsotonicCalibrator):
        bps = ",".join(repr(b) for b in cal.breakpoints)
        vals = ",".join(repr(v) for v in cal.values)
        return f"kind=isotonic\nbreakpoints={bps}\nvalues={vals}\n"
    raise ValueError(f"unknown calibrator: {cal!r}")


def calibrator_from_text(text: str):
    fields = {}
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    kind = fields.get("kind")
    if kind == "platt":
        return PlattCalibrator(slope=float(fields["slope"]), intercept=float(fields["intercept"]))
    if kind == "isotonic":
        return IsotonicCalibrator(
            breakpoints=tuple(float(v) for v in fields["breakpoints"].split(",")),
            values=tuple(float(v) for v in fields["values"].split(",")),
        )
    raise ValueError(f"unknown calibrator kind: {kind!r}")
