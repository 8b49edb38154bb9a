import numpy as np

from ergoswitch.kernels import pseudo_time_march


def single_node(reward=1.0):
    zeros = np.zeros((1, 1, 1))
    return {
        "lower": zeros,
        "upper": zeros,
        "reward": np.full((1, 1, 1), reward),
        "cost": zeros,
        "inner": np.array([True]),
        "beta": 1.0,
        "n_penalty": 0.0,
        "dtau": 0.5,
    }


class TestPseudoTimeMarch:
    def test_converged(self):
        values = np.zeros((1, 1))

        iterations, residual, converged = pseudo_time_march(
            **single_node(), values=values, tol=1e-12, max_iterations=1000
        )

        assert converged
        assert iterations == 40
        assert residual == 0.5 ** 40
        assert values[0, 0] == 1 - 0.5 ** 40

    def test_iteration_cap(self):
        values = np.zeros((1, 1))

        iterations, residual, converged = pseudo_time_march(
            **single_node(), values=values, tol=1e-12, max_iterations=3
        )

        assert not converged
        assert iterations == 3
        assert residual == 0.125
        assert values[0, 0] == 0.875

    def test_already_converged(self):
        values = np.ones((1, 1))

        assert pseudo_time_march(
            **single_node(), values=values, tol=1e-12, max_iterations=10
        ) == (0, 0.0, True)

    def test_penalty(self):
        kwargs = single_node(reward=0.0)
        kwargs.update(
            lower=np.zeros((1, 2, 1)),
            upper=np.zeros((1, 2, 1)),
            reward=np.array([[[0.0], [1.0]]]),
            cost=np.array([[[0.0, 0.1], [0.1, 0.0]]]),
            n_penalty=1.0,
            dtau=0.25,
        )
        values = np.zeros((1, 2))

        _, _, converged = pseudo_time_march(
            **kwargs, values=values, tol=1e-12, max_iterations=10_000
        )

        assert converged
        np.testing.assert_allclose(values, [[0.45, 1.0]], atol=1e-11)
