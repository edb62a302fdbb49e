"""Income process, full-insurance transfers and firm-side values."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError
from .utility import c_star

DEVIATION_SCALINGS = ("definition", "prop1")


@dataclass(frozen=True, eq=False)
class IncomeDistribution:
    """Finite i.i.d. income law on ``e^1 < ... < e^M``. ``probs`` defaults to uniform."""

    support: np.ndarray
    probs: np.ndarray | None = None
    mean: float = field(init=False)

    def __post_init__(self):
        support = np.array(self.support, dtype=float).ravel()
        if support.size == 0:
            raise ConfigError("economy.support: must contain at least one income level")
        if not np.all(np.isfinite(support)) or np.any(support <= 0):
            raise ConfigError("economy.support: income levels must be positive and finite")
        if np.any(np.diff(support) <= 0):
            raise ConfigError("economy.support: income levels must be strictly increasing")
        if self.probs is None:
            probs = np.full(support.size, 1.0 / support.size)
        else:
            probs = np.array(self.probs, dtype=float).ravel()
        if probs.shape != support.shape:
            raise ConfigError(
                f"economy.probs: expected {support.size} probabilities, got {probs.size}"
            )
        if not np.all(probs > 0):
            raise ConfigError("economy.probs: probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigError(f"economy.probs: must sum to 1, got {probs.sum():.17g}")
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "mean", float(probs @ support))

    @property
    def n_states(self):
        return self.support.size

    @property
    def cdf(self):
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return cdf

    def index_of(self, e):
        """Index of each ``e`` in the support; DomainError if absent."""
        e = np.asarray(e, dtype=float)
        idx = np.clip(np.searchsorted(self.support, e), 0, self.n_states - 1)
        hit = np.isclose(self.support[idx], e, rtol=1e-12, atol=0.0)
        if not np.all(hit):
            bad = e[~hit].flat[0] if e.ndim else float(e)
            raise DomainError(f"income {bad!r} is not in the support {self.support.tolist()}")
        return idx if e.ndim else int(idx)

    def expect(self, values, axis=-1):
        return np.tensordot(np.asarray(values, dtype=float), self.probs, axes=([axis], [0]))

    def __repr__(self):
        return (
            f"IncomeDistribution(support={self.support.tolist()}, "
            f"probs={self.probs.tolist()})"
        )


@dataclass(frozen=True)
class MechanismConfig:
    beta: float = 0.9
    lambda0: float = 1.0
    deviation_scaling: str = "definition"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"mechanism.beta: must lie in (0, 1), got {self.beta!r}")
        if not (np.isfinite(self.lambda0) and self.lambda0 > 0):
            raise ConfigError(f"mechanism.lambda0: must be positive, got {self.lambda0!r}")
        scaling = str(self.deviation_scaling).lower()
        if scaling not in DEVIATION_SCALINGS:
            raise ConfigError(
                f"mechanism.deviation_scaling: expected one of {DEVIATION_SCALINGS}, "
                f"got {self.deviation_scaling!r}"
            )
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "lambda0", float(self.lambda0))
        object.__setattr__(self, "deviation_scaling", scaling)


def transfer(spec, lam, e):
    """Full-insurance transfer ``c_star(lam) - e``.

    ``e + transfer`` reproduces ``c_star`` bit for bit whenever the
    difference is representable (always when ``e/2 <= c <= 2e``); otherwise
    the two differ by one ulp of ``max(e, |transfer|)`` and nudging the
    transfer by a few ulps does not close the gap.
    """
    e = np.asarray(e, dtype=float)
    if not np.all(e > 0):
        raise DomainError("income must be strictly positive")
    tau = np.asarray(c_star(spec, lam), dtype=float) - e
    return float(tau) if tau.ndim == 0 else tau


def v2(spec, cfg, dist, lam, e0):
    """Firm value of full insurance at weight ``lam`` given date-0 income ``e0``."""
    dist.index_of(e0)
    c = c_star(spec, lam)
    b = cfg.beta
    out = (1.0 - b) * (np.asarray(e0, dtype=float) - c) + b * (dist.mean - c)
    return float(out) if np.ndim(out) == 0 else out


def vbar2(spec, cfg, dist, lam):
    out = dist.mean - np.asarray(c_star(spec, lam))
    return float(out) if np.ndim(out) == 0 else out


def deviation(spec, cfg, dist, lam, e):
    """Centred firm value ``v2(lam, e) - E[v2(lam, e)]`` under the configured scaling.

    ``"definition"`` gives ``(1 - beta) (e - mean)``; ``"prop1"`` drops the
    ``(1 - beta)`` factor. Both are independent of ``lam``.
    """
    c_star(spec, lam)  # domain check only
    dist.index_of(e)
    gap = np.asarray(e, dtype=float) - dist.mean
    if cfg.deviation_scaling == "definition":
        gap = (1.0 - cfg.beta) * gap
    return float(gap) if gap.ndim == 0 else gap


class IncomeStream:
    """Counter-style income draws: the draw for ``(seed, agent, period)`` never
    depends on which other agents or periods were simulated."""

    def __init__(self, seed=0):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"rng.seed: must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed

    def _generator(self, agent):
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(agent),))
        return np.random.Generator(np.random.Philox(ss))

    def uniforms(self, agent, n_periods):
        """Uniform variates for periods ``0 .. n_periods - 1`` of one agent."""
        return self._generator(agent).random(n_periods)

    def uniform_matrix(self, agents, n_periods):
        agents = list(agents)
        out = np.empty((len(agents), n_periods))
        for row, agent in enumerate(agents):
            out[row] = self.uniforms(agent, n_periods)
        return out

    def draw_index(self, dist, agent, period):
        u = self.uniforms(agent, period + 1)[-1]
        return int(income_index(dist, u))


def income_index(dist, u):
    idx = np.searchsorted(dist.cdf, u, side="right")
    return np.minimum(idx, dist.n_states - 1)


def sample_income(dist, stream, agent=0, period=0):
    """One income draw for ``(agent, period)`` from ``stream``."""
    return float(dist.support[stream.draw_index(dist, agent, period)])
