import math

import numpy as np
import pytest

from ergoswitch.dual_game import (
    IntensityPolicy,
    McConfig,
    McEstimate,
    check_moment_bound,
    discretization_drift,
    estimate_payoff,
    simulate_path,
    sup_inf_search,
    tail_bound,
)
from ergoswitch.exceptions import ErgoswitchException, MonteCarloException
from ergoswitch.mixins import RefMixin
from tests.unit.factories import (
    McConfigFactory,
    ModelFactory,
    PolicyFactory,
    TwoRegimeModelFactory,
)


@pytest.fixture
def frozen_model():
    """Constant state, unit reward."""
    return ModelFactory(
        drift=lambda x, i, u: 0.0,
        diffusion=lambda x, i, u: 0.0,
        running_reward=lambda x, i, u: 1.0,
    )


class TestMcConfig:
    def test_defaults(self):
        cfg = McConfig()

        assert cfg.n_paths == 10_000
        assert cfg.n_steps == 1200
        np.testing.assert_array_equal(cfg.weights(4), [0.25] * 4)

    @pytest.mark.parametrize(
        ["horizon", "dt", "expected"],
        [
            pytest.param(12.0, 0.05, 240, id="exact multiple"),
            pytest.param(0.1, 0.03, 4, id="rounded up"),
            pytest.param(0.05, 0.05, 1, id="single step"),
        ],
    )
    def test_n_steps(self, horizon, dt, expected):
        assert McConfigFactory(horizon=horizon, dt=dt).n_steps == expected

    @pytest.mark.parametrize(
        ["kwargs"],
        [
            pytest.param({"n_paths": 0}, id="no path"),
            pytest.param({"n_paths": 10.0}, id="float paths"),
            pytest.param({"dt": 0.0}, id="zero dt"),
            pytest.param({"horizon": 0.01}, id="horizon below dt"),
            pytest.param({"horizon": math.inf}, id="infinite horizon"),
            pytest.param({"seed": -1}, id="negative seed"),
            pytest.param({"seed": 2 ** 64}, id="seed overflow"),
            pytest.param({"block_size": 0}, id="empty block"),
            pytest.param({"tail_tol": 0.0}, id="zero tail tolerance"),
            pytest.param({"envelope_domain": (1.0, -1.0)}, id="reversed domain"),
            pytest.param({"theta_mu_weights": (0.5, 0.6)}, id="weights above 1"),
            pytest.param({"theta_mu_weights": (1.5, -0.5)}, id="negative weight"),
            pytest.param({"theta_mu_weights": ()}, id="no weight"),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(MonteCarloException):
            McConfigFactory(**kwargs)

    def test_weights(self):
        cfg = McConfigFactory(theta_mu_weights=[0.25, 0.75])

        assert cfg.theta_mu_weights == (0.25, 0.75)
        np.testing.assert_array_equal(cfg.weights(2), [0.25, 0.75])
        with pytest.raises(MonteCarloException, match="2 weights for 3"):
            cfg.weights(3)

    def test_replace(self):
        cfg = McConfigFactory()

        other = cfg.replace(seed=5)

        assert other.seed == 5
        assert other.n_paths == cfg.n_paths
        assert cfg.seed == 0


class TestIntensityPolicy:
    class TestInheritance:
        def test_ref_mixin(self, mocker):
            ref_mixin_init_mock = mocker.patch.object(
                RefMixin, "__init__", wraps=RefMixin.__init__
            )

            policy = PolicyFactory(ref="my_policy")

            assert isinstance(policy, RefMixin)
            assert ref_mixin_init_mock.call_count == 1
            assert policy.ref == "my_policy"

        def test_default_ref(self):
            assert PolicyFactory().ref.startswith("policy-")

        def test_invalid_ref(self):
            with pytest.raises(ErgoswitchException):
                PolicyFactory(ref="a,b")

    def test_constant(self):
        policy = PolicyFactory(xi_levels=(1.0, 2.0), nu_levels=(1.0, 3.0))
        x = np.zeros(4)

        assert policy.n_bound == 2.0
        assert policy.k_bound == 2.0
        np.testing.assert_array_equal(
            policy.regime_intensities(x, 0, 2), [[1.0, 2.0]] * 4
        )
        np.testing.assert_array_equal(policy.control_intensities(x, 1), [3.0] * 4)

    def test_combine(self):
        xi = PolicyFactory(xi_levels=(2.0, 2.0), ref="xi")
        nu = PolicyFactory(xi_levels=(1.0, 1.0), nu_levels=(4.0, 1.0), ref="nu")

        policy = xi.combine(nu)

        assert policy.ref == "xi+nu"
        assert policy.n_bound == 2.0
        assert policy.k_bound == 3.0
        x = np.zeros(1)
        np.testing.assert_array_equal(policy.regime_intensities(x, 0, 2), [[2.0, 2.0]])
        np.testing.assert_array_equal(policy.control_intensities(x, 0), [4.0])

    @pytest.mark.parametrize(
        ["kwargs"],
        [
            pytest.param({"xi": 1.0}, id="xi not callable"),
            pytest.param({"n_bound": 0.0}, id="zero regime bound"),
            pytest.param({"k_bound": -1.0}, id="negative tilt bound"),
        ],
    )
    def test_invalid(self, kwargs):
        arguments = {
            "xi": lambda x, i: 1.0,
            "nu": lambda x, l: 1.0,
            "n_bound": 1.0,
            "k_bound": 0.0,
            **kwargs,
        }

        with pytest.raises(MonteCarloException):
            IntensityPolicy(**arguments)

    @pytest.mark.parametrize(
        ["xi"],
        [
            pytest.param(lambda x, i: 0.0, id="zero intensity"),
            pytest.param(lambda x, i: 1.5, id="above bound"),
            pytest.param(lambda x, i: np.ones((x.size, 3)), id="wrong shape"),
        ],
    )
    def test_regime_intensities_out_of_range(self, xi):
        policy = IntensityPolicy(xi, lambda x, l: 1.0, n_bound=1.0, k_bound=0.0)

        with pytest.raises(MonteCarloException):
            policy.regime_intensities(np.zeros(2), 0, 2)

    @pytest.mark.parametrize(
        ["nu"],
        [
            pytest.param(lambda x, l: 0.5, id="below one"),
            pytest.param(lambda x, l: 3.0, id="above bound"),
        ],
    )
    def test_control_intensities_out_of_range(self, nu):
        policy = IntensityPolicy(lambda x, i: 1.0, nu, n_bound=1.0, k_bound=1.0)

        with pytest.raises(MonteCarloException):
            policy.control_intensities(np.zeros(2), 0)


class TestMcEstimate:
    def test_from_samples(self):
        estimate = McEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]), seed=3)

        assert estimate.mean == 2.5
        assert estimate.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
        assert estimate.n_paths == 4
        assert estimate.seed == 3


class TestEstimatePayoff:
    def test_deterministic(self, frozen_model):
        cfg = McConfigFactory()

        estimate = estimate_payoff(frozen_model, 0.0, 0, 0, PolicyFactory(), 1.0, cfg)

        assert estimate.mean == pytest.approx(1 - math.exp(-12.0), rel=1e-12)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-15)
        assert estimate.n_paths == 200

    def test_simulate_path(self):
        model = ModelFactory()
        policy = PolicyFactory()
        cfg = McConfigFactory(n_paths=3, block_size=1)

        estimate = estimate_payoff(model, 0.5, 0, 0, policy, 1.0, cfg)

        payoffs = [
            simulate_path(model, 0.5, 0, 0, policy, 1.0, cfg, k) for k in range(3)
        ]
        assert estimate.mean == pytest.approx(np.mean(payoffs), rel=1e-14)

    def test_reproducible(self):
        model, policy = ModelFactory(), PolicyFactory()
        cfg = McConfigFactory(n_paths=50)

        first = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg)
        second = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg)
        other = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg.replace(seed=1))

        assert first == second
        assert first.mean != other.mean

    def test_block_size_sets_streams(self):
        model, policy = ModelFactory(), PolicyFactory()
        cfg = McConfigFactory(n_paths=50, block_size=10)

        first = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg)
        second = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg)
        regrouped = estimate_payoff(
            model, 0.0, 0, 0, policy, 1.0, cfg.replace(block_size=25)
        )

        assert first == second
        assert first.mean != regrouped.mean

    def test_self_jumps_are_neutral(self):
        model = ModelFactory()
        cfg = McConfigFactory(n_paths=50)

        calm = estimate_payoff(model, 0.0, 0, 0, PolicyFactory(), 1.0, cfg)
        busy = estimate_payoff(
            model, 0.0, 0, 0, PolicyFactory(xi_levels=(50.0,)), 1.0, cfg
        )

        assert calm == busy

    def test_switching_pays(self):
        model, cfg = TwoRegimeModelFactory(), McConfigFactory()
        policy = PolicyFactory(xi_levels=(1e-3, 50.0))

        estimate = estimate_payoff(model, 0.0, 0, 0, policy, 1.0, cfg)

        # reward 1 after a quick switch of cost 0.1
        assert 0.7 < estimate.mean < 0.9

    def test_tail_too_long(self):
        cfg = McConfigFactory(horizon=1.0)

        with pytest.raises(MonteCarloException, match="too short"):
            estimate_payoff(ModelFactory(), 0.0, 0, 0, PolicyFactory(), 0.1, cfg)

    def test_tail_warning(self, frozen_model, caplog):
        cfg = McConfigFactory(horizon=5.0, tail_tol=0.01)

        estimate_payoff(frozen_model, 0.0, 0, 0, PolicyFactory(), 1.0, cfg)

        assert "close to its tolerance" in caplog.text

    @pytest.mark.parametrize(
        ["args"],
        [
            pytest.param((math.nan, 0, 0, 1.0), id="non-finite state"),
            pytest.param((0.0, 1, 0, 1.0), id="regime out of range"),
            pytest.param((0.0, 0, 1, 1.0), id="control out of range"),
            pytest.param((0.0, 0, 0, 0.0), id="zero discount"),
        ],
    )
    def test_invalid_start(self, args):
        x, i, u_idx, beta = args

        with pytest.raises(MonteCarloException):
            estimate_payoff(
                ModelFactory(), x, i, u_idx, PolicyFactory(), beta, McConfigFactory()
            )

    def test_single_path(self):
        with pytest.raises(MonteCarloException, match="at least two paths"):
            estimate_payoff(
                ModelFactory(),
                0.0,
                0,
                0,
                PolicyFactory(),
                1.0,
                McConfigFactory(n_paths=1),
            )


class TestSimulatePath:
    def test_non_finite_state(self):
        model = ModelFactory(
            drift=lambda x, i, u: 1e308,
            diffusion=lambda x, i, u: 0.0,
            running_reward=lambda x, i, u: 0.0,
        )
        cfg = McConfigFactory(dt=1.0)

        with pytest.raises(MonteCarloException, match="non-finite state at step 1"):
            simulate_path(model, 0.0, 0, 0, PolicyFactory(), 1.0, cfg, 0)


class TestTailBound:
    def test_bound(self, frozen_model):
        cfg = McConfigFactory(horizon=10.0, dt=0.5)

        assert tail_bound(frozen_model, 0.5, cfg) == pytest.approx(
            2 * math.exp(-5.0)
        )


class TestSupInfSearch:
    def test_regime_intensities(self):
        model, cfg = TwoRegimeModelFactory(), McConfigFactory()
        xi_family = [
            PolicyFactory(xi_levels=(1e-3, 1e-3), ref="stay"),
            PolicyFactory(xi_levels=(1e-3, 50.0), ref="move"),
        ]
        nu_family = [PolicyFactory(xi_levels=(1.0, 1.0), ref="flat")]

        saddle = sup_inf_search(model, 0.0, 0, 1.0, xi_family, nu_family, cfg)

        assert (saddle.xi_index, saddle.nu_index) == (1, 0)
        assert len(saddle.table) == 2
        assert len(saddle.table[0]) == 1
        assert saddle.estimate is saddle.table[1][0]
        assert saddle.table[0][0].mean < 0.01

    def test_control_tilts(self):
        model = ModelFactory(
            controls=[0.0, 1.0],
            drift=lambda x, i, u: 0.0,
            running_reward=lambda x, i, u: u,
        )
        xi_family = [PolicyFactory()]
        nu_family = [
            PolicyFactory(nu_levels=(1.0, 1.0), ref="uniform"),
            PolicyFactory(nu_levels=(50.0, 1.0), ref="toward-zero"),
        ]

        saddle = sup_inf_search(
            model, 0.0, 0, 1.0, xi_family, nu_family, McConfigFactory()
        )

        assert saddle.nu_index == 1
        assert saddle.table[0][0].mean > saddle.table[0][1].mean + 0.1

    def test_empty_family(self):
        with pytest.raises(MonteCarloException):
            sup_inf_search(
                ModelFactory(), 0.0, 0, 1.0, [], [PolicyFactory()], McConfigFactory()
            )


class TestCheckMomentBound:
    def test_pass(self):
        report = check_moment_bound(
            ModelFactory(), 3.0, 0, 0, PolicyFactory(), McConfigFactory()
        )

        assert report.name == "moment_bound"
        assert report.passed
        assert report.tolerance == 0.0

    def test_explosive(self):
        model = ModelFactory(drift=lambda x, i, u: x)

        report = check_moment_bound(
            model, 3.0, 0, 0, PolicyFactory(), McConfigFactory()
        )

        assert not report.passed
        assert report.witness["t"] == 8.0
        assert report.witness["moment"] > report.witness["bound"]

    def test_stationary_level(self):
        cfg = McConfigFactory(n_paths=4000, block_size=500)

        report = check_moment_bound(ModelFactory(), 0.0, 0, 0, PolicyFactory(), cfg)

        moments = report.witness["moments"]
        assert report.passed
        assert len(moments) == 4
        # Euler stationary variance is 1 / (2 - dt)
        np.testing.assert_allclose(moments[2:], 0.5, atol=0.06)

    def test_decay_from_far_start(self):
        cfg = McConfigFactory(n_paths=4000, block_size=500)

        report = check_moment_bound(ModelFactory(), 3.0, 0, 0, PolicyFactory(), cfg)

        moments = report.witness["moments"]
        assert report.passed
        assert moments[0] > moments[1] > moments[2]
        assert moments[0] == pytest.approx(1.6, abs=0.15)
        assert moments[-1] == pytest.approx(0.5, abs=0.06)


class TestDiscretizationDrift:
    def test_deterministic(self, frozen_model):
        estimate = discretization_drift(
            frozen_model, 0.0, 0, 0, PolicyFactory(), 1.0, McConfigFactory()
        )

        assert estimate.mean == pytest.approx(0.0, abs=1e-12)
        assert estimate.n_paths == 200

    def test_reproducible(self):
        cfg = McConfigFactory(n_paths=20)

        model, policy = ModelFactory(), PolicyFactory()

        first = discretization_drift(model, 0.5, 0, 0, policy, 1.0, cfg)
        second = discretization_drift(model, 0.5, 0, 0, policy, 1.0, cfg)

        assert first == second
        assert math.isfinite(first.mean)
