"""Compiled inner loops of the discounted solver."""
import numpy as np
from numba import njit  # type: ignore


@njit(cache=True)
def pseudo_time_march(
    lower,
    upper,
    reward,
    cost,
    inner,
    beta,
    n_penalty,
    dtau,
    values,
    tol,
    max_iterations,
):
    """
    Damped Jacobi march of the penalized discounted system, in place.

    Each sweep computes `r = -βV + H(V) + n·Σ_j[V_j - V_i - c_ij]⁺` at every node
    and regime, stops when the sup of `|r|` over inner nodes is below `tol`,
    and otherwise updates `V ← V + dτ·r`.

    Returns:
        (sweeps done, last inner residual, converged flag)
    """
    n_nodes, m, p = lower.shape
    increment = np.empty((n_nodes, m))
    residual = np.inf
    for iteration in range(max_iterations + 1):
        residual = 0.0
        for k in range(n_nodes):
            for i in range(m):
                v = values[k, i]
                best = np.inf
                for l in range(p):
                    g = reward[k, i, l]
                    if k > 0:
                        g += lower[k, i, l] * (values[k - 1, i] - v)
                    if k < n_nodes - 1:
                        g += upper[k, i, l] * (values[k + 1, i] - v)
                    if g < best:
                        best = g
                penalty = 0.0
                for j in range(m):
                    gap = values[k, j] - v - cost[k, i, j]
                    if gap > 0.0:
                        penalty += gap
                r = -beta * v + best + n_penalty * penalty
                increment[k, i] = r
                if inner[k] and abs(r) > residual:
                    residual = abs(r)
        if residual <= tol:
            return iteration, residual, True
        if iteration == max_iterations:
            break
        for k in range(n_nodes):
            for i in range(m):
                values[k, i] += dtau * increment[k, i]
    return max_iterations, residual, False
