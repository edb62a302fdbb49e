"""Mutual insurance with unobservable income: the lambda-mechanism, its
numerical checks and a promised-utility baseline."""

__version__ = "0.1.0"

from .baseline import BaselineModel, baseline_simulate, baseline_solve
from .config import RunConfig, load_config, parse_config
from .economy import (
    IncomeDistribution,
    IncomeStream,
    MechanismConfig,
    deviation,
    sample_income,
    transfer,
    v2,
    vbar2,
)
from .estimators import MutualInsuranceMechanism, PromisedUtilityContract
from .exceptions import (
    ConfigError,
    ContractionError,
    ConvergenceError,
    DomainError,
    LambdaMutualError,
    MechanismInfeasibleError,
    RangeError,
    StatisticsError,
)
from .mechanism import (
    LinearFixedPointProblem,
    WeightMap,
    check_ic,
    firm_one_step,
    lambda_next,
    neumann_solve,
    one_step_residual,
)
from .simulation import PanelRecord, StatsReport, cross_section_stats, simulate_panel
from .utility import UtilitySpec, c_star, u_eval, u_prime_inv, vbar1, vbar1_inv
