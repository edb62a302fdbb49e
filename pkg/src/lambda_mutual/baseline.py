"""Promised-utility contract with private income, solved by value iteration.

Two income states. The state is the agent's promised utility ``w``; the
firm chooses consumption ``c_i`` and continuation promises ``w_i'`` per
reported state to maximise ``sum_i p_i [-(1-beta) tau_i + beta P(w_i')]``
subject to promise keeping and truth telling.

``P`` lives on a uniform grid and is interpolated in between. For a
candidate pair ``(w_1', w_2')`` the consumptions follow from promise
keeping and a binding high-type constraint; pairs violating the low
type's constraint are dropped. With the incentive constraints switched off,
promise keeping with equal consumption across states pins ``c`` instead.
Candidate pairs are searched by a zooming grid around ``w``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .economy import IncomeStream, income_index
from .exceptions import ConvergenceError, DomainError
from .utility import u_inv, utility, utility_extended, vbar1

EPS_CONSUMPTION = 1e-3


def promise_grid(spec, dist, grid_size):
    """Promised-utility grid from ``u(1e-3)`` to ``u(e^M + span)``."""
    lo = utility(spec, EPS_CONSUMPTION)
    hi = utility(spec, dist.support[-1] + (dist.support[-1] - dist.support[0]))
    return np.linspace(lo, hi, int(grid_size))


def _solve_low_consumption(spec, dist, beta, s, tol=1e-14):
    """Solve ``(1-beta) [p1 u(c) + p2 u(c + gap)] = s`` for ``c`` by bisection.

    Returns ``(c, ok)``; ``ok`` is False where ``s`` is not attainable.
    """
    p1, p2 = dist.probs
    gap = dist.support[1] - dist.support[0]

    def f(c):
        return (1.0 - beta) * (p1 * utility_extended(spec, c) + p2 * utility(spec, c + gap))

    lo = np.full(s.shape, 1e-12)
    hi = np.full(s.shape, 1e8)
    ok = (f(lo) < s) & (s < f(hi))
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        below = f(mid) < s
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all((hi - lo) <= tol * hi):
            break
    return np.sqrt(lo * hi), ok


@dataclass(eq=False)
class BaselineModel:
    """Solved promised-utility contract.

    ``value`` holds ``P`` on ``grid``. The policy is tabulated on the finer
    ``policy_grid``: ``continuation[i, s]`` and ``consumption[i, s]`` are the
    next promise and consumption after reporting state ``s``.
    """

    grid: np.ndarray
    value: np.ndarray
    policy_grid: np.ndarray
    continuation: np.ndarray
    consumption: np.ndarray
    incentive_compatible: bool
    interpolation: str = "cubic"
    residuals: list = field(default_factory=list)
    clamp_count: int = 0

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0])

    def value_at(self, w):
        return _interpolator(self.grid, self.value, self.interpolation)(w)

    def next_promises(self, w):
        """Continuation promises at arbitrary ``w`` by linear interpolation of the policy."""
        w = np.asarray(w, dtype=float)
        return np.stack(
            [np.interp(w, self.policy_grid, self.continuation[:, s]) for s in range(2)], axis=-1
        )

    def policy(self, spec, beta, dist, w):
        """``(continuation, consumption)`` at ``w``; consumption restores promise keeping."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        nxt = self.next_promises(w)
        c1, c2, ok = _consumptions(spec, dist, beta, w, nxt[:, :1], nxt[:, 1:],
                                   self.incentive_compatible)
        cons = np.stack([c1[:, 0, 0], c2[:, 0, 0]], axis=1)
        cons[~ok[:, 0, 0]] = np.nan
        return nxt, cons

    def promise_keeping_residual(self, spec, beta, dist, w=None, policy=None):
        if w is None:
            w, nxt, cons = self.policy_grid, self.continuation, self.consumption
        else:
            nxt, cons = policy if policy is not None else self.policy(spec, beta, dist, w)
        flow = (1.0 - beta) * utility(spec, cons) + beta * nxt
        return np.abs(flow @ dist.probs - w)

    def ic_slack(self, spec, beta, dist, w=None, policy=None):
        """Smallest truth-telling slack at each point (policy grid by default)."""
        if w is None:
            nxt, cons = self.continuation, self.consumption
        else:
            nxt, cons = policy if policy is not None else self.policy(spec, beta, dist, w)
        e = dist.support
        own = (1.0 - beta) * utility(spec, cons) + beta * nxt
        slack = np.full(own.shape[0], np.inf)
        for i in range(2):
            j = 1 - i
            alt = (1.0 - beta) * utility_extended(spec, e[i] - e[j] + cons[:, j]) + beta * nxt[:, j]
            slack = np.minimum(slack, own[:, i] - alt)
        return slack

    def decay_rate(self, skip=5):
        """Per-sweep contraction ratio fitted to the log sup-norm changes."""
        r = np.asarray(self.residuals[skip:])
        r = r[r > 0]
        if r.size < 3:
            return float("nan")
        slope = np.polyfit(np.arange(r.size), np.log(r), 1)[0]
        return float(np.exp(slope))


def _consumptions(spec, dist, beta, w, w1, w2, incentive_compatible):
    """Consumptions and feasibility for promises ``w`` (n,), ``w1`` (n, K), ``w2`` (n, K).

    Output arrays are shaped ``(n, K, K)`` with ``w1`` along axis 1 and
    ``w2`` along axis 2.
    """
    p1, p2 = dist.probs
    gap = dist.support[1] - dist.support[0]
    n, K = w1.shape
    shape = (n, K, K)
    W1 = w1[:, :, None]
    W2 = w2[:, None, :]
    if incentive_compatible:
        c1, ok1 = _solve_low_consumption(spec, dist, beta, w[:, None] - beta * w1)
        c1 = np.broadcast_to(c1[:, :, None], shape)
        ok = np.broadcast_to(ok1[:, :, None], shape).copy()
        u2 = utility(spec, c1 + gap) + beta * (W1 - W2) / (1.0 - beta)
        ok &= spec.in_range(u2)
        c2 = np.full(shape, np.nan)
        c2[ok] = u_inv(spec, u2[ok])
        with np.errstate(invalid="ignore"):
            truth = (1.0 - beta) * utility_extended(spec, c1) + beta * W1
            lie = (1.0 - beta) * utility_extended(spec, np.where(ok, c2 - gap, -1.0)) + beta * W2
        ok &= truth >= lie - 1e-12
        c1 = np.where(ok, c1, np.nan)
    else:
        target = (w[:, None, None] - beta * (p1 * W1 + p2 * W2)) / (1.0 - beta)
        ok = spec.in_range(target)
        c1 = np.full(shape, np.nan)
        c1[ok] = u_inv(spec, target[ok])
        c2 = c1
    return c1, c2, ok


def _best_policy(spec, dist, beta, grid, value_at, w, incentive_compatible, stages):
    """Zooming grid search for the continuation promises at each ``w``.

    Every stage searches a ``K x K`` window of offsets ``w_i' - w`` centred on
    the previous best and one previous step wide on each side.
    Returns ``(value, w1, w2, c1, c2)``.
    """
    e1, e2 = dist.support
    p1, p2 = dist.probs
    lo, hi = grid[0], grid[-1]
    n = w.size
    centre1 = np.zeros(n)
    centre2 = np.zeros(n)
    rows = np.arange(n)
    for radius, K in stages:
        base = np.linspace(-radius, radius, K)
        w1 = np.clip(w[:, None] + centre1[:, None] + base, lo, hi)
        w2 = np.clip(w[:, None] + centre2[:, None] + base, lo, hi)
        c1, c2, ok = _consumptions(spec, dist, beta, w, w1, w2, incentive_compatible)
        with np.errstate(invalid="ignore"):
            flow = -(1.0 - beta) * (p1 * (c1 - e1) + p2 * (c2 - e2))
        obj = flow + beta * (p1 * value_at(w1)[:, :, None] + p2 * value_at(w2)[:, None, :])
        obj = np.where(ok, obj, -np.inf)
        best = obj.reshape(n, -1).argmax(axis=1)
        j, k = np.divmod(best, K)
        best_w1, best_w2 = w1[rows, j], w2[rows, k]
        centre1 = best_w1 - w
        centre2 = best_w2 - w
        best_value = obj[rows, j, k]
        best_c1, best_c2 = c1[rows, j, k], c2[rows, j, k]
    return best_value, best_w1, best_w2, best_c1, best_c2


def _zoom_stages(grid, levels=5):
    span = grid[-1] - grid[0]
    stages = [(span / 16.0, 41)]
    for _ in range(levels - 1):
        radius, K = stages[-1]
        stages.append((2.0 * radius / (K - 1), 21))
    return stages


def _interpolator(grid, values, kind):
    if kind == "linear":
        return lambda x: np.interp(x, grid, values)
    if kind == "cubic":
        return CubicSpline(grid, values)
    raise DomainError(f"interpolation must be 'linear' or 'cubic', got {kind!r}")


def baseline_solve(spec, cfg, dist, grid_size=200, tol=1e-8, incentive_compatible=True,
                   max_iter=2000, interpolation="cubic", policy_density=10):
    """Value iteration for the promised-utility contract on a uniform grid.

    ``P`` is interpolated between grid points (cubic spline by default) so
    continuation promises need not sit on the grid. After convergence the
    policy is tabulated on a grid ``policy_density`` times finer for
    simulation.
    """
    if dist.n_states != 2:
        raise DomainError(
            f"the promised-utility baseline needs exactly 2 income states, got {dist.n_states}"
        )
    if grid_size < 10:
        raise DomainError("grid_size must be at least 10")
    beta = cfg.beta
    grid = promise_grid(spec, dist, grid_size)
    stages = _zoom_stages(grid)

    # full-insurance firm value as the starting guess
    P = dist.mean - np.asarray(u_inv(spec, grid))
    residuals = []
    for _ in range(max_iter):
        value_at = _interpolator(grid, P, interpolation)
        P_new = _best_policy(spec, dist, beta, grid, value_at, grid, incentive_compatible,
                             stages)[0]
        if not np.all(np.isfinite(P_new)):
            raise DomainError("some promises on the grid cannot be delivered by any policy")
        diff = float(np.max(np.abs(P_new - P)))
        residuals.append(diff)
        P = P_new
        if diff <= tol:
            break
    else:
        raise ConvergenceError(
            f"value iteration did not converge in {max_iter} sweeps (last change {diff:.3e})",
            residual=diff,
        )

    policy_grid = np.linspace(grid[0], grid[-1], (grid_size - 1) * policy_density + 1)
    _, w1, w2, c1, c2 = _best_policy(spec, dist, beta, grid, _interpolator(grid, P, interpolation),
                                     policy_grid, incentive_compatible, stages)
    continuation = np.stack([w1, w2], axis=1)
    consumption = np.stack([c1, c2], axis=1)
    at_edge = (continuation <= grid[0]) | (continuation >= grid[-1])
    return BaselineModel(
        grid=grid,
        value=P,
        policy_grid=policy_grid,
        continuation=continuation,
        consumption=consumption,
        incentive_compatible=incentive_compatible,
        interpolation=interpolation,
        residuals=residuals,
        clamp_count=int(at_edge.sum()),
    )


@dataclass(eq=False)
class BaselineStats:
    t: np.ndarray
    n_alive: np.ndarray
    mean_w: np.ndarray
    var_w: np.ndarray
    censored_count: np.ndarray
    w0: float
    max_pk_residual: float

    def rows(self):
        for i in range(self.t.size):
            yield int(self.t[i]), self.mean_w[i], self.var_w[i], int(self.censored_count[i])


def baseline_simulate(model, spec, cfg, dist, agents, periods, seed=0, w0=None):
    """Simulate promise paths under the solved policy with i.i.d. incomes.

    ``w0`` defaults to the full-insurance value at ``cfg.lambda0``. The report
    in period ``t`` sets the promise for ``t + 1``. A path whose next promise
    reaches the grid boundary is censored from that period on.
    """
    agents, periods = int(agents), int(periods)
    if agents < 1 or periods < 1:
        raise DomainError("agents and periods must be >= 1")
    if w0 is None:
        w0 = vbar1(spec, cfg.lambda0)
    lo, hi = model.grid[0], model.grid[-1]
    if not lo < w0 < hi:
        raise DomainError(f"initial promise {w0!r} outside the grid [{lo!r}, {hi!r}]")
    beta = cfg.beta
    stream = IncomeStream(seed)
    states = income_index(dist, stream.uniform_matrix(range(agents), periods + 1))

    w = np.full((agents, periods + 1), np.nan)
    w[:, 0] = w0
    alive = np.zeros((agents, periods + 1), dtype=bool)
    alive[:, 0] = True
    pk_max = 0.0
    for t in range(periods):
        rows = np.flatnonzero(alive[:, t])
        nxt, cons = model.policy(spec, beta, dist, w[rows, t])
        pk = model.promise_keeping_residual(spec, beta, dist, w[rows, t], (nxt, cons))
        pk_max = max(pk_max, float(np.nanmax(pk)))
        chosen = nxt[np.arange(rows.size), states[rows, t]]
        inside = (chosen > lo) & (chosen < hi) & np.all(np.isfinite(cons), axis=1)
        w[rows[inside], t + 1] = chosen[inside]
        alive[rows[inside], t + 1] = True

    n_alive = alive.sum(axis=0)
    if np.any(n_alive == 0):
        raise DomainError("every baseline path was censored")
    censored = np.zeros(periods + 1, dtype=int)
    censored[1:] = (alive[:, :-1] & ~alive[:, 1:]).sum(axis=0)
    return BaselineStats(np.arange(periods + 1), n_alive, np.nanmean(w, axis=0),
                         np.nanvar(w, axis=0), censored, float(w0), pk_max)
