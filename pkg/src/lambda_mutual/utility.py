"""Closed-form utility families and the full-insurance value map.

Every function accepts a scalar or an array and returns the same shape
(a Python float for scalar input).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DomainError, RangeError

FAMILIES = ("log", "crra")


@dataclass(frozen=True)
class UtilitySpec:
    """Utility family ``u`` with ``u'`` onto the positive reals.

    Parameters
    ----------
    family : {"log", "crra"}
    gamma : float, optional
        Relative risk aversion for ``"crra"``; must be positive and not 1.
    """

    family: str = "log"
    gamma: float | None = None

    def __post_init__(self):
        family = str(self.family).lower()
        object.__setattr__(self, "family", family)
        if family == "cara":
            raise ConfigError(
                "utility.family: CARA is not supported because u' is bounded "
                "and does not map onto the positive reals (surjectivity assumption)"
            )
        if family not in FAMILIES:
            raise ConfigError(f"utility.family: unknown family {self.family!r}")
        if family == "log":
            if self.gamma not in (None, 1, 1.0):
                raise ConfigError("utility.gamma: only allowed for family 'crra'")
            object.__setattr__(self, "gamma", 1.0)
            return
        if self.gamma is None:
            raise ConfigError("utility.gamma: required for family 'crra'")
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or gamma <= 0:
            raise ConfigError(f"utility.gamma: must be positive, got {self.gamma!r}")
        if gamma == 1.0:
            raise ConfigError("utility.gamma: gamma=1 is the 'log' family")
        object.__setattr__(self, "gamma", gamma)

    @property
    def is_log(self):
        return self.family == "log"

    @property
    def value_range(self):
        """Open interval ``(lo, hi)`` containing every value of ``u``."""
        if self.is_log:
            return (-np.inf, np.inf)
        if self.gamma < 1:
            return (0.0, np.inf)
        return (-np.inf, 0.0)

    def in_range(self, v):
        lo, hi = self.value_range
        v = np.asarray(v, dtype=float)
        return (v > lo) & (v < hi)


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _positive(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError(f"{name} must be strictly positive, got {_first_bad(x, x > 0)}")
    return x


def _first_bad(x, ok):
    return x[~ok].flat[0] if x.ndim else float(x)


def utility(spec, c):
    c = _positive(c, "consumption")
    if spec.is_log:
        return _out(np.log(c))
    g = spec.gamma
    return _out(c ** (1.0 - g) / (1.0 - g))


def marginal_utility(spec, c):
    c = _positive(c, "consumption")
    if spec.is_log:
        return _out(1.0 / c)
    return _out(c ** (-spec.gamma))


def u_eval(spec, c):
    """Return ``(u(c), u'(c))``."""
    return utility(spec, c), marginal_utility(spec, c)


def utility_extended(spec, c):
    """``u`` extended to ``c <= 0``: ``-inf`` there, except ``u(0) = 0`` when gamma < 1."""
    c = np.asarray(c, dtype=float)
    out = np.full(c.shape, -np.inf)
    pos = c > 0
    if np.any(pos):
        out[pos] = utility(spec, c[pos] if c.ndim else float(c))
    if not spec.is_log and spec.gamma < 1:
        out[c == 0] = 0.0
    return _out(out)


def u_prime_inv(spec, y):
    y = _positive(y, "marginal utility")
    if spec.is_log:
        return _out(1.0 / y)
    return _out(y ** (-1.0 / spec.gamma))


def u_inv(spec, v):
    """Consumption delivering utility ``v`` (the certainty equivalent)."""
    v = np.asarray(v, dtype=float)
    ok = spec.in_range(v)
    if not np.all(ok):
        raise RangeError(
            f"utility value {_first_bad(v, ok)} outside range {spec.value_range} "
            f"of the {spec.family} family"
        )
    if spec.is_log:
        return _out(np.exp(v))
    g = spec.gamma
    return _out(((1.0 - g) * v) ** (1.0 / (1.0 - g)))


def c_star(spec, lam):
    """Full-insurance consumption ``(u')^{-1}(1/lam)``."""
    lam = _positive(lam, "lambda")
    if spec.is_log:
        return _out(lam.copy())
    return _out(lam ** (1.0 / spec.gamma))


def vbar1(spec, lam):
    """Individual's contract value ``u(c_star(lam))``; strictly increasing in ``lam``."""
    lam = _positive(lam, "lambda")
    if spec.is_log:
        return _out(np.log(lam))
    g = spec.gamma
    # u(lam^{1/g}) written without the intermediate power
    return _out(lam ** ((1.0 - g) / g) / (1.0 - g))


def vbar1_inv(spec, v):
    """Weight ``lam`` with ``vbar1(lam) == v``. Raises RangeError outside the range of u."""
    v = np.asarray(v, dtype=float)
    ok = spec.in_range(v)
    if not np.all(ok):
        raise RangeError(
            f"contract value {_first_bad(v, ok)} outside range {spec.value_range} "
            f"of the {spec.family} family"
        )
    if spec.is_log:
        return _out(np.exp(v))
    g = spec.gamma
    return _out(((1.0 - g) * v) ** (g / (1.0 - g)))
