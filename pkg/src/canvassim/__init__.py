"""Spatial eviction-risk simulation and canvassing-policy evaluation.

The library samples city-wide risk rankings from a Mallows model, assigns
them to neighborhoods, runs budgeted canvassing policies against the layout,
and evaluates targeting effectiveness (RENT), dispersion calibration, and
intervention utility.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationMethod,
    EqualFrequency,
    EqualWidth,
    GiniCurvePoint,
    IsotonicCalibrator,
    ObservedNeighborhoodProfile,
    PhiEstimate,
    PlattCalibrator,
    ReliabilityBin,
    calibrate_phi_envelope,
    calibrate_phi_gini,
    calibrator_from_text,
    calibrator_to_text,
    gini_curve,
    isotonic_regression,
    platt_scaling,
    reliability_curve,
)
from .city import (
    CityConfig,
    CityModel,
    NeighborhoodStats,
    assign_to_neighborhoods,
    gini_index,
    homogeneous_central_ranking,
    neighborhood_stats,
)
from .dataio import (
    LoadResult,
    PropertyRecord,
    load_properties,
    read_manifest,
    records_from_model,
    write_city_csv,
    write_csv,
    write_manifest,
    write_plan_csv,
    write_property_csv,
)
from .evaluation import (
    InterventionScenario,
    OutcomeModel,
    PolicyKind,
    RentResult,
    RentSweepRow,
    expected_discovered,
    expected_reduction,
    realized_discovered,
    rent,
    rent_sweep,
    simulate_rent_once,
)
from .policies import (
    CanvassPlan,
    CostModel,
    NeighborhoodOrder,
    OrderingKey,
    budget_for_neighborhoods,
    hpt,
    non_targeting,
    order_neighborhoods,
    route_cost,
    tpt,
)
from .rankings import (
    Distance,
    MallowsParams,
    as_ranking,
    footrule_normalizer,
    kendall_tau,
    mallows_normalizer,
    mallows_pmf,
    sample_mh,
    sample_rim,
    spearman_footrule,
)

__all__ = [name for name in dir() if not name.startswith("_")]
