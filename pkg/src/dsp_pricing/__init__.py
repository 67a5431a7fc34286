"""Pickup expectations for bundled crowdsourced delivery and incentive pricing."""

__version__ = "0.1.0"

from .asymptotic import AlphaQuery, alpha, alpha_pinsky, q_hat
from .bundle import BundlePmf, deterministic, make_pmf, parse_pmf, truncated_poisson, uniform
from .errors import (CapExceededError, ConfigError, DomainError, DSPError, InvalidDistributionError,
                     QuadratureError)
from .exact import (ExpectationQuery, GammaTable, build_gamma, expected_pickups_circle,
                    expected_pickups_line, expected_remaining_line, get_table, ode_residual)
from .pricing import (CostParams, IncentiveModel, optimize_incentive, package_price, total_cost,
                      van_only_cost)
from .routing import Instance, cvrp_solve, tsp_tour
from .scenarios import Scenario, default_params, run_case_study
from .simulate import mc_expected_pickups, simulate_circle
