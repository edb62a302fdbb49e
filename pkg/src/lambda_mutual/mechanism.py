"""The lambda-recursion, its incentive check and the one-step operator residuals."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .economy import deviation, transfer, vbar2
from .exceptions import ContractionError, ConvergenceError, DomainError, MechanismInfeasibleError
from .utility import utility, utility_extended, vbar1, vbar1_inv

IC_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Next-period weight ``lambda'(e)`` for every income state."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.weights) > 0)):
            raise DomainError("next-period weights must be strictly positive")

    def __getitem__(self, e):
        idx = int(np.argmin(np.abs(self.support - e)))
        if not math.isclose(self.support[idx], e, rel_tol=1e-12):
            raise KeyError(e)
        return float(self.weights[idx])

    def __len__(self):
        return self.support.size

    def __eq__(self, other):
        if not isinstance(other, WeightMap):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.weights, other.weights
        )

    def as_dict(self):
        return dict(zip(self.support.tolist(), self.weights.tolist()))


def continuation_values(spec, cfg, dist, lam):
    """``vbar1(lam) + deviation(e) / (lam * beta)`` for every state (no range check)."""
    dev = deviation(spec, cfg, dist, lam, dist.support)
    return vbar1(spec, lam) + dev / (lam * cfg.beta)


def feasible_weights(spec, values):
    """Invert ``vbar1`` where possible.

    Returns ``(weights, ok)``; ``ok`` is False where a value lies outside the
    range of vbar1 or its inverse is not a finite positive double (NaN there).
    """
    values = np.asarray(values, dtype=float)
    ok = spec.in_range(values)
    weights = np.full(values.shape, np.nan)
    with np.errstate(over="ignore", under="ignore"):
        weights[ok] = vbar1_inv(spec, values[ok])
    ok &= np.isfinite(weights) & (weights > 0)
    weights[~ok] = np.nan
    return weights, ok


def lambda_next(spec, cfg, dist, lam):
    """The weight map prescribed by the mechanism at current weight ``lam``."""
    values = continuation_values(spec, cfg, dist, lam)
    weights, ok = feasible_weights(spec, values)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        e = float(dist.support[i])
        where = "outside the range" if not spec.in_range(values[i]) else "not invertible in double precision within the range"
        raise MechanismInfeasibleError(
            f"continuation value {values[i]!r} at lambda={lam!r}, e={e!r} is {where} "
            f"{spec.value_range} of vbar1",
            state=e,
            value=float(values[i]),
        )
    return WeightMap(dist.support, weights)


@dataclass(frozen=True, eq=False)
class ICReport:
    """Truth-telling slack. ``slack[i, j]`` is the gain of reporting ``e^i``
    over ``e^j`` for an agent whose income is ``e^i``."""

    lam: float
    support: np.ndarray
    slack: np.ndarray
    flagged: np.ndarray
    tol: float = IC_TOLERANCE

    @property
    def min_slack(self):
        return float(self.slack.min())

    @property
    def holds(self):
        return self.min_slack >= -self.tol

    def violations(self):
        """``(e, e_report, slack)`` for every pair below ``-tol``."""
        rows, cols = np.nonzero(self.slack < -self.tol)
        return [
            (float(self.support[i]), float(self.support[j]), float(self.slack[i, j]))
            for i, j in zip(rows, cols)
        ]

    def rows(self):
        M = self.support.size
        for i in range(M):
            for j in range(M):
                yield self.lam, float(self.support[i]), float(self.support[j]), float(self.slack[i, j])


def check_ic(spec, cfg, dist, lam, wm=None):
    """Evaluate every truthful-versus-misreport pair under weight map ``wm``."""
    if wm is None:
        wm = lambda_next(spec, cfg, dist, lam)
    if not np.array_equal(wm.support, dist.support):
        raise DomainError("weight map must be defined on the full income support")
    b = cfg.beta
    e = dist.support
    tau = transfer(spec, lam, e)
    cons = e[:, None] + tau[None, :]  # true income by row, report by column
    flow = utility_extended(spec, cons)
    value = (1.0 - b) * flow + b * np.asarray(vbar1(spec, wm.weights))[None, :]
    truthful = np.diag(value).copy()
    with np.errstate(invalid="ignore"):
        slack = truthful[:, None] - value
    np.fill_diagonal(slack, 0.0)
    return ICReport(float(lam), e, slack, cons <= 0)


def one_step_value(spec, cfg, dist, lam, wm=None):
    """Expected truthful payoff ``E[(1-beta) u(c) + beta vbar1(lambda'(e))]``."""
    if wm is None:
        wm = lambda_next(spec, cfg, dist, lam)
    b = cfg.beta
    cons = dist.support + transfer(spec, lam, dist.support)
    payoff = (1.0 - b) * utility(spec, cons) + b * vbar1(spec, wm.weights)
    return float(dist.expect(payoff))


def one_step_residual(spec, cfg, dist, lam):
    """``|T vbar1(lam) - vbar1(lam)|`` at the mechanism's own weight map."""
    return abs(one_step_value(spec, cfg, dist, lam) - vbar1(spec, lam))


def spread_gap(spec, cfg, dist, lam, wm=None):
    """``E[vbar1(lambda'(e))] - vbar1(lam)``; zero for a mean-preserving spread."""
    if wm is None:
        wm = lambda_next(spec, cfg, dist, lam)
    return float(dist.expect(vbar1(spec, wm.weights))) - vbar1(spec, lam)


class FirmOneStep(NamedTuple):
    values: np.ndarray
    mean: float
    current: float

    @property
    def gap(self):
        return self.mean - self.current


def firm_one_step(spec, cfg, dist, lam, wm=None):
    """Firm values ``vbar2(lambda'(e))`` next period, their mean and ``vbar2(lam)``.

    Nothing is optimised; the numbers show whether the firm is indifferent.
    """
    if wm is None:
        wm = lambda_next(spec, cfg, dist, lam)
    values = np.asarray(vbar2(spec, cfg, dist, wm.weights), dtype=float)
    return FirmOneStep(values, float(dist.expect(values)), vbar2(spec, cfg, dist, lam))


@dataclass(frozen=True, eq=False)
class LinearFixedPointProblem:
    """``x = L x + b`` with a dense operator ``L``."""

    operator: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.operator, dtype=float))
        b = np.asarray(self.offset, dtype=float).ravel()
        if L.shape[0] != L.shape[1] or L.shape[0] != b.size:
            raise DomainError(f"operator shape {L.shape} does not match offset length {b.size}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(b))):
            raise DomainError("operator and offset must be finite")
        object.__setattr__(self, "operator", L)
        object.__setattr__(self, "offset", b)

    @property
    def dimension(self):
        return self.offset.size

    @property
    def norm(self):
        """Induced l1 norm: maximum absolute column sum."""
        return float(np.abs(self.operator).sum(axis=0).max())

    @classmethod
    def from_text(cls, text):
        """Parse ``n``, then ``n`` rows of ``L``, then ``b`` (whitespace separated)."""
        lines = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise DomainError("empty problem file")
        try:
            n = int(lines[0][0])
            rows = [[float(x) for x in ln] for ln in lines[1 : n + 1]]
            b = [float(x) for x in lines[n + 1]]
        except (ValueError, IndexError) as exc:
            raise DomainError(f"malformed problem file: {exc}") from None
        if len(lines) != n + 2 or any(len(r) != n for r in rows) or len(b) != n:
            raise DomainError(f"problem file must hold n={n}, {n} rows of length {n}, and b")
        return cls(np.array(rows), np.array(b))


class NeumannResult(NamedTuple):
    solution: np.ndarray
    iterations: int
    residual: float


def neumann_solve(problem, tol=1e-12, max_iter=100_000):
    """Sum ``L^n b`` until the increment drops below ``tol * (1 - ||L||)``.

    The returned residual is ``||x - (L x + b)||_1``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    norm = problem.norm
    if norm >= 1.0:
        raise ContractionError(f"operator norm {norm:.17g} >= 1; the series need not converge")
    L = problem.operator
    term = problem.offset.copy()
    x = term.copy()
    threshold = tol * (1.0 - norm)
    n = 0
    while np.abs(term).sum() >= threshold:
        if n >= max_iter:
            raise ConvergenceError(
                f"Neumann series not converged after {max_iter} terms",
                residual=float(np.abs(term).sum()),
            )
        term = L @ term
        x += term
        n += 1
    residual = float(np.abs(x - (L @ x + problem.offset)).sum())
    return NeumannResult(x, n, residual)
