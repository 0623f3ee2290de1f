"""Numerical laboratory for entropy convexity on a branching metric
measure space."""

from .backend import BACKEND
from .geometry import (PairClass, Point, Profile, SingularPart, SpaceParams,
                       build_profile, c_constant, classify_pair, density,
                       dist_inf, profile_eval)
from .measures import (DiscreteMeasure, TransportPlan,
                       check_cyclical_monotonicity, discretize, entropy,
                       wasserstein)
from .midpoint import (MidpointResult, certify_midpoint, check_injectivity,
                       jacobian_of_composition, midpoint, y_tilde)
from .transport import (TransportMap, analytic_family, solve_structured,
                        verify_map_properties)
from .convexity import (GeodesicFamily, build_dyadic_geodesic,
                        jacobi_condition_margin, k_convexity_report,
                        midpoint_entropy_gap, weighted_entropy_gap)
from .experiments import (CounterexampleReport, ScenarioConfig,
                          counterexample_run, eta_construct, mgh_check,
                          run_scenario)

__version__ = "0.1.0"
