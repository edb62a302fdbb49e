import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambda_mutual import (
    ConfigError,
    DomainError,
    IncomeDistribution,
    IncomeStream,
    MechanismConfig,
    UtilitySpec,
    c_star,
    deviation,
    sample_income,
    transfer,
    v2,
    vbar2,
)
from lambda_mutual.economy import income_index
from lambda_mutual.utility import marginal_utility

from oracles import v2_series

LAMBDAS = [0.25, 0.5, 1.0, 2.0, 4.0]


class TestIncomeDistribution:
    def test_defaults_to_uniform(self):
        d = IncomeDistribution([0.5, 1.5, 2.5])
        np.testing.assert_allclose(d.probs, 1 / 3)
        assert d.mean == pytest.approx(1.5)

    def test_mean(self):
        d = IncomeDistribution([1.0, 3.0], [0.25, 0.75])
        assert d.mean == 2.5

    @pytest.mark.parametrize(
        "support,probs,match",
        [([1.5, 0.5], None, "increasing"), ([0.5, 0.5], None, "increasing"),
         ([0.0, 1.0], None, "positive"), ([0.5, 1.5], [0.5, 0.4], "sum to 1"),
         ([0.5, 1.5], [1.0, 0.0], "strictly positive"), ([0.5, 1.5], [1.0], "expected 2"),
         ([], None, "at least one")],
    )
    def test_invalid(self, support, probs, match):
        with pytest.raises(ConfigError, match=match):
            IncomeDistribution(support, probs)

    def test_immutable(self, two_state):
        with pytest.raises(ValueError):
            two_state.support[0] = 3.0

    def test_index_of(self, two_state):
        assert two_state.index_of(1.5) == 1
        with pytest.raises(DomainError):
            two_state.index_of(1.0)


def test_mechanism_config_validation():
    with pytest.raises(ConfigError, match="beta"):
        MechanismConfig(beta=1.0)
    with pytest.raises(ConfigError, match="lambda0"):
        MechanismConfig(lambda0=0.0)
    with pytest.raises(ConfigError, match="deviation_scaling"):
        MechanismConfig(deviation_scaling="other")
    assert MechanismConfig(deviation_scaling="Prop1").deviation_scaling == "prop1"


def test_transfer_examples(log_u, crra2):
    assert transfer(log_u, 2.0, 0.5) == 1.5
    assert transfer(log_u, 1.0, 1.5) == -0.5
    assert transfer(crra2, 4.0, 2.0) == 0.0
    with pytest.raises(DomainError):
        transfer(log_u, 0.0, 1.0)


@pytest.mark.parametrize("spec", [UtilitySpec("log"), UtilitySpec("crra", 0.5), UtilitySpec("crra", 2.0)])
def test_full_insurance_identity_bitwise(spec):
    # consumption within [e/2, 2e]: the difference is exact (Sterbenz)
    c = np.linspace(0.75, 1.0, 2001)[:, None]
    lam = 1.0 / np.asarray(marginal_utility(spec, c))
    e = np.array([[0.5, 1.5]])
    assert np.array_equal(e + transfer(spec, lam, e), np.broadcast_to(c_star(spec, lam), (lam.size, 2)))


@pytest.mark.parametrize("spec", [UtilitySpec("log"), UtilitySpec("crra", 0.5), UtilitySpec("crra", 2.0)])
def test_full_insurance_identity_within_one_ulp(spec):
    rng = np.random.default_rng(11)
    lam = np.exp(rng.normal(0, 0.7, 20_000))
    e = rng.choice([0.3, 0.5, 1.0, 1.5, 2.75], lam.size)
    c = c_star(spec, lam)
    tau = transfer(spec, lam, e)
    err = np.abs(e + tau - c)
    assert np.all(err <= np.spacing(np.maximum(e, np.abs(tau))))


@pytest.mark.parametrize(
    "lam,e0,expected", [(1.0, 0.5, -0.05), (1.0, 1.5, 0.05), (2.0, 0.5, -1.05)]
)
def test_v2_examples(log_u, two_state, cfg, lam, e0, expected):
    oracle = v2_series(1, 0.9, [0.5, 1.5], [0.5, 0.5], lam, e0)
    assert oracle == pytest.approx(expected, abs=1e-12)
    assert v2(log_u, cfg, two_state, lam, e0) == pytest.approx(expected, abs=1e-12)


def test_v2_rejects_off_support(log_u, two_state, cfg):
    with pytest.raises(DomainError):
        v2(log_u, cfg, two_state, 1.0, 1.0)


@pytest.mark.parametrize("spec", [UtilitySpec("log"), UtilitySpec("crra", 2.0)])
@pytest.mark.parametrize("beta", [0.5, 0.9, 0.99])
def test_v2_against_truncated_series(spec, beta):
    dist = IncomeDistribution([0.4, 1.0, 1.9], [0.2, 0.5, 0.3])
    cfg = MechanismConfig(beta)
    gamma = 1 if spec.is_log else spec.gamma
    for lam in LAMBDAS:
        max_tau = np.max(np.abs(transfer(spec, lam, dist.support)))
        for e0 in dist.support:
            oracle = v2_series(gamma, beta, dist.support, dist.probs, lam, e0)
            assert abs(v2(spec, cfg, dist, lam, e0) - oracle) <= 1e-12 + beta**500 * max_tau


def test_vbar2_examples(log_u, crra2, two_state, cfg):
    assert vbar2(log_u, cfg, two_state, 1.0) == 0.0
    assert vbar2(log_u, cfg, two_state, 2.0) == -1.0
    weighted = sum(p * v2(log_u, cfg, two_state, 2.0, e) for p, e in zip(two_state.probs, two_state.support))
    assert vbar2(log_u, cfg, two_state, 2.0) == pytest.approx(weighted, abs=1e-15)
    d13 = IncomeDistribution([1.0, 3.0])
    assert vbar2(crra2, cfg, d13, 4.0) == 0.0


def test_deviation_examples(log_u, two_state, cfg, cfg_prop1):
    d = deviation(log_u, cfg, two_state, 1.0, 1.5)
    assert d == pytest.approx(0.05, abs=1e-15)
    assert d == pytest.approx(v2(log_u, cfg, two_state, 1.0, 1.5) - vbar2(log_u, cfg, two_state, 1.0), abs=1e-15)
    assert deviation(log_u, cfg_prop1, two_state, 1.0, 1.5) == 0.5
    three = IncomeDistribution([0.5, 1.0, 1.5])
    assert deviation(log_u, cfg, three, 3.0, 1.0) == 0.0
    assert deviation(log_u, cfg_prop1, three, 3.0, 1.0) == 0.0


@pytest.mark.parametrize("scaling", ["definition", "prop1"])
@pytest.mark.parametrize("spec", [UtilitySpec("log"), UtilitySpec("crra", 2.0)])
def test_deviation_zero_mean_and_lambda_free(spec, scaling):
    dist = IncomeDistribution([0.3, 0.8, 1.1, 2.9], [0.1, 0.4, 0.3, 0.2])
    cfg = MechanismConfig(0.9, deviation_scaling=scaling)
    rows = np.array([deviation(spec, cfg, dist, lam, dist.support) for lam in LAMBDAS])
    assert np.all(np.abs(rows @ dist.probs) <= 1e-12)
    assert np.max(np.abs(rows - rows[0])) <= 1e-12


def test_definition_deviation_matches_v2_difference(log_u):
    dist = IncomeDistribution([0.3, 0.8, 1.1, 2.9], [0.1, 0.4, 0.3, 0.2])
    cfg = MechanismConfig(0.7)
    for lam in LAMBDAS:
        for e in dist.support:
            direct = v2(log_u, cfg, dist, lam, e) - vbar2(log_u, cfg, dist, lam)
            assert deviation(log_u, cfg, dist, lam, e) == pytest.approx(direct, abs=1e-12)


class TestIncomeStream:
    def test_degenerate(self):
        d = IncomeDistribution([2.0])
        s = IncomeStream(5)
        assert {sample_income(d, s, a, t) for a in range(5) for t in range(5)} == {2.0}

    def test_frequency(self):
        d = IncomeDistribution([1.0, 2.0], [0.3, 0.7])
        u = IncomeStream(2024).uniforms(0, 10**6)
        freq = np.mean(income_index(d, u) == 0)
        # binomial standard error is 4.6e-4; 0.002 is about 4.4 of them
        assert abs(freq - 0.3) <= 0.002

    def test_deterministic(self, two_state):
        a = sample_income(two_state, IncomeStream(99), agent=3, period=17)
        b = sample_income(two_state, IncomeStream(99), agent=3, period=17)
        assert a == b

    def test_draw_matches_bulk(self, two_state):
        s = IncomeStream(7)
        bulk = two_state.support[income_index(two_state, s.uniforms(4, 10))]
        single = [sample_income(two_state, s, 4, t) for t in range(10)]
        assert bulk.tolist() == single

    def test_agents_are_independent_streams(self):
        s = IncomeStream(1)
        assert not np.array_equal(s.uniforms(0, 20), s.uniforms(1, 20))
        np.testing.assert_array_equal(s.uniform_matrix([1, 0], 5)[1], s.uniforms(0, 5))

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(ConfigError):
            IncomeStream(seed)

    def test_full_64_bit_seed(self):
        assert IncomeStream(2**64 - 1).uniforms(0, 3).shape == (3,)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 50), min_size=1, max_size=6, unique=True), st.floats(0.05, 20))
def test_full_insurance_property(levels, lam):
    dist = IncomeDistribution(sorted(levels))
    spec = UtilitySpec("log")
    tau = transfer(spec, lam, dist.support)
    err = np.abs(dist.support + tau - c_star(spec, lam))
    assert np.all(err <= np.spacing(np.maximum(dist.support, np.abs(tau))))
