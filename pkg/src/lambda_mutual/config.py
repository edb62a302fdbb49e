"""TOML run configuration.

Example::

    [utility]
    family = "log"

    [economy]
    support = [0.5, 1.5]

    [mechanism]
    beta = 0.9
    lambda0 = 1.0

    [rng]
    seed = 12345
"""

import re
from dataclasses import dataclass, field

import tomli

from .economy import IncomeDistribution, MechanismConfig
from .exceptions import ConfigError, LambdaMutualError
from .utility import UtilitySpec

SCHEMA = {
    "utility": {"family", "gamma"},
    "economy": {"support", "probs"},
    "mechanism": {"beta", "lambda0", "deviation_scaling"},
    "rng": {"seed"},
    "simulation": {"agents", "periods"},
    "baseline": {"grid_size", "tol", "incentive_compatible", "interpolation"},
    "output": {"panel", "stats", "ic", "baseline"},
}


@dataclass
class RunConfig:
    utility: UtilitySpec = field(default_factory=UtilitySpec)
    economy: IncomeDistribution = field(
        default_factory=lambda: IncomeDistribution([0.5, 1.5])
    )
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    seed: int = 0
    simulation: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def parse_config(text):
    """Validate TOML ``text`` into a RunConfig."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else "?"
        raise ConfigError(f"parse error at line {line}: {exc}") from None

    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    util = raw.get("utility", {})
    econ = raw.get("economy", {})
    mech = raw.get("mechanism", {})
    try:
        family = util.get("family", "log")
        gamma = util.get("gamma")
        if gamma is not None:
            gamma = _number(gamma, "utility.gamma")
        spec = UtilitySpec(family, gamma)

        if "support" not in econ:
            raise ConfigError("economy.support: required")
        support = econ["support"]
        if not isinstance(support, list):
            raise ConfigError("economy.support: expected an array")
        support = [_number(x, "economy.support") for x in support]
        probs = econ.get("probs")
        if probs is not None:
            if not isinstance(probs, list):
                raise ConfigError("economy.probs: expected an array")
            probs = [_number(x, "economy.probs") for x in probs]
        dist = IncomeDistribution(support, probs)

        cfg = MechanismConfig(
            beta=_number(mech.get("beta", 0.9), "mechanism.beta"),
            lambda0=_number(mech.get("lambda0", 1.0), "mechanism.lambda0"),
            deviation_scaling=mech.get("deviation_scaling", "definition"),
        )
    except LambdaMutualError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    seed = raw.get("rng", {}).get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"rng.seed: expected a 64-bit unsigned integer, got {seed!r}")

    sim = dict(raw.get("simulation", {}))
    for key in ("agents", "periods"):
        if key in sim and (isinstance(sim[key], bool) or not isinstance(sim[key], int) or sim[key] < 1):
            raise ConfigError(f"simulation.{key}: expected a positive integer")
    base = dict(raw.get("baseline", {}))
    if "grid_size" in base and (not isinstance(base["grid_size"], int) or base["grid_size"] < 10):
        raise ConfigError("baseline.grid_size: expected an integer >= 10")
    if "tol" in base and _number(base["tol"], "baseline.tol") <= 0:
        raise ConfigError("baseline.tol: must be positive")

    return RunConfig(spec, dist, cfg, seed, sim, base, dict(raw.get("output", {})))


def load_config(path):
    """Read and validate a TOML config file. OSError propagates for missing files."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    return parse_config(text)
