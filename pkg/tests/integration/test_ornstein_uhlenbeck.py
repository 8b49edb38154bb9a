import pytest

from ergoswitch.dual_game import IntensityPolicy, McConfig, estimate_payoff
from ergoswitch.elliptic import solve_elliptic
from ergoswitch.ergodic import extract_ergodic
from ergoswitch.model import preset
from tests.unit.factories import GridFactory


def closed_form(beta, x):
    """Discounted value of `∫e^{-βt}X_t² dt` for `dX = -X dt + dW`."""
    return x ** 2 / (beta + 2) + 1 / (beta * (beta + 2))


@pytest.fixture(scope="module")
def model():
    return preset("ou_quadratic")


@pytest.fixture(scope="module")
def fine_solve(model):
    grid = GridFactory(x_min=-6.0, x_max=6.0, n_nodes=961)
    return grid, solve_elliptic(model, grid, 1.0)


@pytest.mark.slow
class TestDiscountedValue:
    @pytest.mark.parametrize(
        ["x", "expected", "tolerance"],
        [
            pytest.param(0.0, 1 / 3, 0.01, id="x=0"),
            pytest.param(1.0, 2 / 3, 0.02, id="x=1"),
        ],
    )
    def test_closed_form(self, fine_solve, x, expected, tolerance):
        grid, solve = fine_solve

        assert closed_form(1.0, x) == pytest.approx(expected)
        assert solve.field.values[grid.nearest_node(x), 0] == pytest.approx(
            expected, abs=tolerance
        )


@pytest.mark.slow
class TestErgodicConstant:
    def test_vanishing_discount(self, model):
        grid = GridFactory(x_min=-6.0, x_max=6.0, n_nodes=241)

        estimate = extract_ergodic(model, grid, (0.5, 0.2, 0.1, 0.05))

        assert estimate.richardson_lambda == pytest.approx(0.5, abs=0.02)
        assert estimate.lambda_ == pytest.approx(1 / 2.05, abs=0.03)
        for beta, lambda_ in zip(estimate.beta_schedule, estimate.lambda_per_beta):
            assert lambda_ == pytest.approx(1 / (beta + 2), abs=0.03)


@pytest.mark.slow
class TestMonteCarloConsistency:
    @pytest.mark.parametrize(
        ["x"],
        [
            pytest.param(0.0, id="x=0"),
            pytest.param(1.0, id="x=1"),
        ],
    )
    def test_payoff_matches_discounted_value(self, model, fine_solve, x):
        grid, solve = fine_solve
        cfg = McConfig(
            n_paths=100_000,
            dt=0.01,
            horizon=12.0,
            seed=2024,
            envelope_domain=(-6.0, 6.0),
        )
        policy = IntensityPolicy.constant((1.0,), ref="neutral")

        estimate = estimate_payoff(model, x, 0, 0, policy, 1.0, cfg)

        pde_value = solve.field.values[grid.nearest_node(x), 0]
        assert abs(estimate.mean - pde_value) <= 3 * estimate.stderr + 0.01
