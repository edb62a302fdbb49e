"""Monte Carlo panel of agents living under the lambda-mechanism."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import spearmanr

from .economy import IncomeStream, deviation, income_index, transfer
from .exceptions import DomainError, StatisticsError
from .mechanism import feasible_weights
from .utility import c_star, vbar1

PANEL_COLUMNS = ("t", "agent", "lambda", "income", "transfer", "consumption", "value")
STATS_COLUMNS = ("t", "mean_value", "var_value", "mean_lambda", "rank_mobility", "infeasible_count")


class PanelRecord(NamedTuple):
    t: int
    agent: int
    lam: float
    income: float
    transfer: float
    consumption: float
    value: float


@dataclass(eq=False)
class Panel:
    """Columnar panel, arrays shaped ``(agents, periods + 1)``.

    Censored agent-periods hold NaN and ``alive`` is False there.
    """

    agents: np.ndarray
    lam: np.ndarray
    income: np.ndarray
    transfer: np.ndarray
    consumption: np.ndarray
    value: np.ndarray
    alive: np.ndarray

    @property
    def n_agents(self):
        return self.lam.shape[0]

    @property
    def n_periods(self):
        return self.lam.shape[1]

    @property
    def n_records(self):
        return int(self.alive.sum())

    def records(self):
        """Surviving records in ``(agent, t)`` order."""
        for row, agent in enumerate(self.agents.tolist()):
            for t in np.flatnonzero(self.alive[row]).tolist():
                yield PanelRecord(
                    t,
                    agent,
                    float(self.lam[row, t]),
                    float(self.income[row, t]),
                    float(self.transfer[row, t]),
                    float(self.consumption[row, t]),
                    float(self.value[row, t]),
                )

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            raise StatisticsError("no panel records")
        agents = sorted({r.agent for r in records})
        pos = {a: i for i, a in enumerate(agents)}
        T = max(r.t for r in records) + 1
        cols = {k: np.full((len(agents), T), np.nan) for k in PANEL_COLUMNS[2:]}
        alive = np.zeros((len(agents), T), dtype=bool)
        for r in records:
            i = pos[r.agent]
            alive[i, r.t] = True
            for key, val in zip(PANEL_COLUMNS[2:], r[2:]):
                cols[key][i, r.t] = val
        return cls(np.array(agents), cols["lambda"], cols["income"], cols["transfer"],
                   cols["consumption"], cols["value"], alive)


def _simulate_block(spec, cfg, dist, keys, periods, stream):
    n = len(keys)
    u = stream.uniform_matrix(keys, periods + 1)
    income = dist.support[income_index(dist, u)]
    dev = np.asarray(deviation(spec, cfg, dist, cfg.lambda0, dist.support))
    dev_draw = dev[income_index(dist, u)]

    lam = np.full((n, periods + 1), np.nan)
    alive = np.zeros((n, periods + 1), dtype=bool)
    lam[:, 0] = cfg.lambda0
    alive[:, 0] = True
    for t in range(1, periods + 1):
        prev = alive[:, t - 1]
        lp = lam[prev, t - 1]
        with np.errstate(over="ignore", divide="ignore"):
            v = vbar1(spec, lp) + dev_draw[prev, t] / (lp * cfg.beta)
        nxt, ok = feasible_weights(spec, v)
        rows = np.flatnonzero(prev)[ok]
        lam[rows, t] = nxt[ok]
        alive[rows, t] = True

    cons = np.full_like(lam, np.nan)
    cons[alive] = c_star(spec, lam[alive])
    income = np.where(alive, income, np.nan)
    tau = np.full_like(lam, np.nan)
    tau[alive] = transfer(spec, lam[alive], income[alive])
    value = np.full_like(lam, np.nan)
    value[alive] = vbar1(spec, lam[alive])
    return lam, income, tau, cons, value, alive


def simulate_panel(spec, cfg, dist, agents, periods, seed=0, agent_keys=None, threads=1,
                   block_size=20_000):
    """Simulate ``agents`` independent weight paths for ``periods`` transitions.

    Weights follow ``lambda_{t+1} = lambda'(lambda_t)(e_{t+1})`` starting from
    ``cfg.lambda0``; each record carries the full-insurance transfer at
    ``lambda_t``. An agent whose continuation value leaves the range of
    vbar1 is censored from that period on.

    ``agent_keys`` selects the random stream of each agent (default
    ``0 .. agents-1``); permuting keys permutes the paths.
    """
    agents, periods = int(agents), int(periods)
    if agents < 1 or periods < 1:
        raise DomainError("agents and periods must be >= 1")
    keys = np.arange(agents) if agent_keys is None else np.asarray(agent_keys, dtype=np.int64)
    if keys.shape != (agents,):
        raise DomainError("agent_keys must hold one key per agent")
    stream = IncomeStream(seed)
    blocks = [keys[i : i + block_size] for i in range(0, agents, block_size)]

    def run(block):
        return _simulate_block(spec, cfg, dist, block.tolist(), periods, stream)

    if threads is None or threads == 0:
        threads = None  # executor default
    if threads == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    lam, income, tau, cons, value, alive = (np.concatenate(p) for p in zip(*parts))
    return Panel(np.arange(agents), lam, income, tau, cons, value, alive)


@dataclass(eq=False)
class StatsReport:
    """Cross-sectional moments of the contract value per period."""

    t: np.ndarray
    n_alive: np.ndarray
    mean_value: np.ndarray
    var_value: np.ndarray
    sd_value: np.ndarray
    mean_lambda: np.ndarray
    rank_mobility: np.ndarray
    infeasible_count: np.ndarray
    initial_value: float
    terminal_gap: np.ndarray

    def standard_errors(self):
        return self.sd_value / np.sqrt(self.n_alive)

    def rows(self):
        for i in range(self.t.size):
            yield (int(self.t[i]), self.mean_value[i], self.var_value[i], self.mean_lambda[i],
                   self.rank_mobility[i], int(self.infeasible_count[i]))

    def terminal_summary(self):
        g = self.terminal_gap
        if g.size == 0:
            return {"n": 0}
        q = np.quantile(g, [0.05, 0.5, 0.95])
        return {"n": int(g.size), "mean": float(g.mean()), "sd": float(g.std()),
                "q05": float(q[0]), "median": float(q[1]), "q95": float(q[2])}


def _rank_corr(a, b):
    if a.size < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return 1.0
    return float(spearmanr(a, b).statistic)


def cross_section_stats(panel, initial_value=None):
    """Per-period mean, variance and rank persistence of ``vbar1(lambda_t)``.

    ``panel`` may also be an iterable of PanelRecord. ``rank_mobility`` at
    ``t`` is the Spearman correlation of values at ``t-1`` and ``t`` among
    agents alive in both (1 by convention at ``t=0`` or without dispersion).
    """
    if not isinstance(panel, Panel):
        panel = Panel.from_records(panel)
    value, alive = panel.value, panel.alive
    T = panel.n_periods
    n_alive = alive.sum(axis=0)
    if np.any(n_alive == 0):
        raise StatisticsError(f"empty cross-section at t={int(np.argmax(n_alive == 0))}")
    mean_value = np.empty(T)
    var_value = np.empty(T)
    sd_value = np.empty(T)
    mean_lambda = np.empty(T)
    mobility = np.ones(T)
    if initial_value is None:
        initial_value = float(value[alive[:, 0], 0][0])
    for t in range(T):
        v = value[alive[:, t], t]
        # centring keeps a degenerate cross-section exactly at the initial value
        mean_value[t] = initial_value + (v - initial_value).mean()
        var_value[t] = v.var()
        sd_value[t] = v.std(ddof=1) if v.size > 1 else 0.0
        mean_lambda[t] = panel.lam[alive[:, t], t].mean()
        if t > 0:
            both = alive[:, t] & alive[:, t - 1]
            mobility[t] = _rank_corr(value[both, t - 1], value[both, t])
    infeasible = np.zeros(T, dtype=int)
    infeasible[1:] = (alive[:, :-1] & ~alive[:, 1:]).sum(axis=0)
    terminal = value[alive[:, -1], -1] - initial_value
    return StatsReport(np.arange(T), n_alive, mean_value, var_value, sd_value, mean_lambda,
                       mobility, infeasible, float(initial_value), terminal)
