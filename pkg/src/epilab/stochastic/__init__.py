"""Random closed sets, normal integrands and Monte Carlo convergence-in-distribution testers."""

from epilab.stochastic.estimators import (
    CapacityEstimate,
    ConfigError,
    DBallUnion,
    RadiusLedger,
    build_D,
    candidate_radii,
    detect_continuity_radii,
    estimate_capacity,
    estimate_joint_hit,
    inclusion_exclusion_union,
    joint_table,
    random_panel,
    screen_radii,
)
from epilab.stochastic.report import FAIL, HYPOTHESIS_NOT_MET, PASS, TestReport
from epilab.stochastic.samplers import (
    ArgminSetSampler,
    DeterministicIntegrand,
    DeterministicSet,
    DoubleWellTilt,
    IntegrandSampler,
    RandomQuadratic,
    SetSampler,
    UniformSingleton,
)
from epilab.stochastic.scenarios import Scenario, get_scenario, scenario_library
from epilab.stochastic.testers import (
    EpiEvent,
    as_events,
    ks_distance,
    test_argmin_fell,
    test_argmin_upper_fell,
    test_epi_convergence_dist,
    test_rcs_convergence,
    test_selection_portmanteau,
    test_tightness,
)

__all__ = [
    "ArgminSetSampler",
    "CapacityEstimate",
    "ConfigError",
    "DBallUnion",
    "DeterministicIntegrand",
    "DeterministicSet",
    "DoubleWellTilt",
    "EpiEvent",
    "FAIL",
    "HYPOTHESIS_NOT_MET",
    "IntegrandSampler",
    "PASS",
    "RadiusLedger",
    "RandomQuadratic",
    "Scenario",
    "SetSampler",
    "TestReport",
    "UniformSingleton",
    "as_events",
    "build_D",
    "candidate_radii",
    "detect_continuity_radii",
    "estimate_capacity",
    "estimate_joint_hit",
    "get_scenario",
    "inclusion_exclusion_union",
    "joint_table",
    "ks_distance",
    "random_panel",
    "scenario_library",
    "screen_radii",
    "test_argmin_fell",
    "test_argmin_upper_fell",
    "test_epi_convergence_dist",
    "test_rcs_convergence",
    "test_selection_portmanteau",
    "test_tightness",
]
