"""scikit-learn style front end.

Both estimators are fitted on observed incomes: ``X`` is a column of
income observations (or the support itself with ``sample_weight`` set to
the probabilities) and the empirical pmf becomes the shock law.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .baseline import baseline_simulate, baseline_solve
from .economy import IncomeDistribution, MechanismConfig, deviation
from .mechanism import check_ic, lambda_next, one_step_residual
from .simulation import cross_section_stats, simulate_panel
from .utility import UtilitySpec, c_star, vbar1


def income_distribution(X, sample_weight=None):
    """Empirical income pmf from a 1-d sample (or a single column)."""
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single income column, got shape {X.shape}")
        X = X[:, 0]
    if sample_weight is None:
        sample_weight = np.ones(X.shape[0])
    sample_weight = np.asarray(sample_weight, dtype=float)
    if sample_weight.shape != X.shape:
        raise ValueError("sample_weight must have one entry per income observation")
    support, inverse = np.unique(X, return_inverse=True)
    weights = np.bincount(inverse.ravel(), weights=sample_weight, minlength=support.size)
    keep = weights > 0
    probs = weights[keep] / weights[keep].sum()
    # renormalise once more so the sum is 1 to within rounding
    probs = probs / probs.sum()
    return IncomeDistribution(support[keep], probs)


def _column(X):
    X = check_array(X, ensure_2d=False, dtype=float, ensure_min_samples=0)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single column, got shape {X.shape}")
        X = X[:, 0]
    return X


class MutualInsuranceMechanism(TransformerMixin, BaseEstimator):
    """Full insurance today, incentive-compatible weights tomorrow.

    Parameters
    ----------
    family : {"log", "crra"}
    gamma : float, optional
        CRRA coefficient (``family="crra"`` only).
    beta : float
        Discount factor in (0, 1).
    lambda0 : float
        Initial allocation weight.
    deviation_scaling : {"definition", "prop1"}
        Scale of the firm-value deviation that moves the weight.

    Attributes
    ----------
    utility_ : UtilitySpec
    config_ : MechanismConfig
    distribution_ : IncomeDistribution
    deviation_ : ndarray of shape (n_states,)
    """

    def __init__(self, family="log", gamma=None, beta=0.9, lambda0=1.0,
                 deviation_scaling="definition"):
        self.family = family
        self.gamma = gamma
        self.beta = beta
        self.lambda0 = lambda0
        self.deviation_scaling = deviation_scaling

    def fit(self, X, y=None, sample_weight=None):
        self.utility_ = UtilitySpec(self.family, self.gamma)
        self.config_ = MechanismConfig(self.beta, self.lambda0, self.deviation_scaling)
        self.distribution_ = income_distribution(X, sample_weight)
        self.n_states_ = self.distribution_.n_states
        self.deviation_ = np.asarray(
            deviation(self.utility_, self.config_, self.distribution_, self.lambda0,
                      self.distribution_.support)
        ).reshape(-1)
        return self

    @classmethod
    def from_config(cls, run_config):
        est = cls(run_config.utility.family,
                  None if run_config.utility.is_log else run_config.utility.gamma,
                  run_config.mechanism.beta, run_config.mechanism.lambda0,
                  run_config.mechanism.deviation_scaling)
        dist = run_config.economy
        return est.fit(dist.support, sample_weight=dist.probs)

    def _parts(self):
        check_is_fitted(self, "distribution_")
        return self.utility_, self.config_, self.distribution_

    def transform(self, X):
        """Next-period weights, shape ``(n, n_states)``, for current weights ``X``."""
        spec, cfg, dist = self._parts()
        lam = _column(X)
        return np.vstack([lambda_next(spec, cfg, dist, float(v)).weights for v in lam]) \
            if lam.size else np.empty((0, dist.n_states))

    def predict(self, X):
        """Full-insurance consumption at weights ``X``."""
        spec, _, _ = self._parts()
        return np.asarray(c_star(spec, _column(X)), dtype=float)

    def contract_value(self, X):
        spec, _, _ = self._parts()
        return np.asarray(vbar1(spec, _column(X)), dtype=float)

    def check_ic(self, lambdas):
        spec, cfg, dist = self._parts()
        return [check_ic(spec, cfg, dist, float(v)) for v in _column(lambdas)]

    def one_step_residual(self, lambdas):
        spec, cfg, dist = self._parts()
        return np.array([one_step_residual(spec, cfg, dist, float(v)) for v in _column(lambdas)])

    def simulate(self, agents, periods, seed=0, threads=1):
        """Return ``(panel, stats)`` for a panel starting at ``lambda0``."""
        spec, cfg, dist = self._parts()
        panel = simulate_panel(spec, cfg, dist, agents, periods, seed, threads=threads)
        return panel, cross_section_stats(panel, vbar1(spec, cfg.lambda0))


class PromisedUtilityContract(BaseEstimator):
    """Promised-utility contract solved by value iteration (two income states).

    ``predict`` gives the firm value ``P(w)`` and ``transform`` the
    continuation promises after each report.
    """

    def __init__(self, family="log", gamma=None, beta=0.9, lambda0=1.0, grid_size=200,
                 tol=1e-8, incentive_compatible=True, interpolation="cubic", max_iter=2000):
        self.family = family
        self.gamma = gamma
        self.beta = beta
        self.lambda0 = lambda0
        self.grid_size = grid_size
        self.tol = tol
        self.incentive_compatible = incentive_compatible
        self.interpolation = interpolation
        self.max_iter = max_iter

    def fit(self, X, y=None, sample_weight=None):
        self.utility_ = UtilitySpec(self.family, self.gamma)
        self.config_ = MechanismConfig(self.beta, self.lambda0)
        self.distribution_ = income_distribution(X, sample_weight)
        self.model_ = baseline_solve(
            self.utility_, self.config_, self.distribution_, self.grid_size, self.tol,
            self.incentive_compatible, self.max_iter, self.interpolation,
        )
        self.grid_ = self.model_.grid
        self.value_ = self.model_.value
        self.n_iter_ = len(self.model_.residuals)
        return self

    @classmethod
    def from_config(cls, run_config, **params):
        est = cls(run_config.utility.family,
                  None if run_config.utility.is_log else run_config.utility.gamma,
                  run_config.mechanism.beta, run_config.mechanism.lambda0, **params)
        dist = run_config.economy
        return est.fit(dist.support, sample_weight=dist.probs)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.asarray(self.model_.value_at(_column(X)), dtype=float)

    def transform(self, X):
        check_is_fitted(self, "model_")
        return self.model_.next_promises(_column(X))

    def simulate(self, agents, periods, seed=0, w0=None):
        check_is_fitted(self, "model_")
        return baseline_simulate(self.model_, self.utility_, self.config_, self.distribution_,
                                 agents, periods, seed, w0)
