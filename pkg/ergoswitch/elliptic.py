import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ergoswitch.discretization import (
    Grid,
    ValueField,
    assemble_stencil,
    hamiltonian_all,
    obstacle_values,
    project_obstacle,
)
from ergoswitch.exceptions import EllipticException, IterationCapException
from ergoswitch.kernels import pseudo_time_march
from ergoswitch.model import SwitchingModel


logger = logging.getLogger(__name__)

DEFAULT_N_SCHEDULE = tuple(2 ** k for k in range(13))
DEFAULT_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-3
DEFAULT_MAX_ITERATIONS = 20_000_000
DAMPING = 0.9


@dataclass(frozen=True)
class PenalizedSolve:
    """
    Solution of the penalized discounted system at one penalty level.

    Attributes:
        beta: discount rate
        n_penalty: penalty level `n`
        field: penalized solution `V^{β,n}`
        residual: inner-domain sup-norm of the discrete penalized equation
        iterations: number of pseudo-time sweeps
    """

    beta: float
    n_penalty: float
    field: ValueField
    residual: float
    iterations: int


@dataclass(frozen=True)
class EllipticSolve:
    """
    Discounted solution `V^β` obtained by driving the penalty level up.

    Attributes:
        beta: discount rate
        field: `V^β`, projected on the switching obstacle
        n_schedule: penalty levels actually solved
        cauchy_gaps: sup-norm gaps between consecutive levels
        obstacle_residual: `sup (MV - V)⁺` of the returned field
        penalty_gap: sup-norm move of the final projection
        converged: the last Cauchy gap reached the requested tolerance
        levels: penalized solves, one per level
    """

    beta: float
    field: ValueField
    n_schedule: List[float]
    cauchy_gaps: List[float]
    obstacle_residual: float
    penalty_gap: float
    converged: bool
    levels: List[PenalizedSolve] = field(default_factory=list, repr=False)


def _check_beta(beta: float) -> None:
    if not isinstance(beta, (int, float)) or not beta > 0 or not math.isfinite(beta):
        raise EllipticException(f"discount rate must be positive: {beta}")


def _penalty_values(values: np.ndarray, cost: np.ndarray, n: float) -> np.ndarray:
    gaps = values[:, None, :] - values[:, :, None] - cost
    return n * np.maximum(gaps, 0.0).sum(axis=2)


def penalty_term(
    V: ValueField, model: SwitchingModel, grid: Grid, n: float
) -> np.ndarray:
    """
    Return the penalty `n·Σ_j max(V(x, j) - V(x, i) - c(x, i, j), 0)`.

    !!! example
        ```python
        --8<-- "tests/doc/reference/elliptic/test_penalty_term.py"
        ```

    Arguments:
        V: field.
        model: switching model.
        grid: spatial grid.
        n: penalty level, nonnegative.

    Returns:
        `(n_nodes, m)` array.

    Raises:
        ergoswitch.exceptions.EllipticException: if `n` is negative.
    """
    if not n >= 0:
        raise EllipticException(f"penalty level must be nonnegative: {n}")
    return _penalty_values(V.values, assemble_stencil(model, grid).cost, n)


def penalized_residual(
    V: ValueField, model: SwitchingModel, grid: Grid, beta: float, n: float
) -> float:
    """
    Return the inner-domain sup-norm of `-βV + H(V) + penalty_term(V, n)`.

    Arguments:
        V: field.
        model: switching model.
        grid: spatial grid.
        beta: discount rate.
        n: penalty level.

    Returns:
        residual of the discrete penalized equation.
    """
    residual = (
        -beta * V.values
        + hamiltonian_all(V, model, grid)
        + penalty_term(V, model, grid, n)
    )
    return float(np.abs(residual[grid.inner_mask()]).max())


def solve_penalized(
    model: SwitchingModel,
    grid: Grid,
    beta: float,
    n: float,
    warm_start: Optional[ValueField] = None,
    tol: float = DEFAULT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> PenalizedSolve:
    """
    Solve the penalized discounted system by damped pseudo-time iteration.

    Iterates `V ← V + dτ·(-βV + H(V) + penalty_term(V, n))` with
    `dτ = 0.9 / (β + n·m + 1/cfl_bound)` until the inner-domain residual is
    below `tol`.

    Arguments:
        model: switching model.
        grid: spatial grid.
        beta: discount rate, strictly positive.
        n: penalty level, nonnegative.
        warm_start: starting field, zero when not provided.
        tol: residual tolerance.
        max_iterations: cap on the number of sweeps.

    Returns:
        the penalized solve.

    Raises:
        ergoswitch.exceptions.EllipticException: on invalid arguments.
        ergoswitch.exceptions.IterationCapException: if the cap is reached.
    """
    _check_beta(beta)
    if not n >= 0 or not math.isfinite(n):
        raise EllipticException(f"penalty level must be nonnegative: {n}")
    if not tol > 0:
        raise EllipticException(f"tolerance must be positive: {tol}")
    stencil = assemble_stencil(model, grid)
    dtau = DAMPING / (beta + n * model.m + 1.0 / stencil.cfl_bound)
    if warm_start is not None:
        if warm_start.values.shape != (grid.n_nodes, model.m):
            raise EllipticException(
                f"warm start of shape {warm_start.values.shape} does not match "
                f"({grid.n_nodes}, {model.m})"
            )
        values = np.array(warm_start.values)
    else:
        values = np.zeros((grid.n_nodes, model.m))

    iterations, residual, converged = pseudo_time_march(
        stencil.lower,
        stencil.upper,
        stencil.reward,
        stencil.cost,
        grid.inner_mask(),
        float(beta),
        float(n),
        dtau,
        values,
        float(tol),
        int(max_iterations),
    )
    if not converged:
        raise IterationCapException(
            f"beta={beta}, n={n}: no convergence after {max_iterations} sweeps",
            last_residual=float(residual),
            iterations=int(iterations),
        )
    logger.debug(
        f"Penalized solve beta={beta} n={n}: {iterations} sweeps, "
        f"residual {residual:.3e}"
    )
    return PenalizedSolve(
        beta=float(beta),
        n_penalty=float(n),
        field=ValueField(values),
        residual=float(residual),
        iterations=int(iterations),
    )


def solve_elliptic(
    model: SwitchingModel,
    grid: Grid,
    beta: float,
    n_schedule: Optional[Sequence[float]] = None,
    tol: float = DEFAULT_TOL,
    gap_tol: float = DEFAULT_GAP_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> EllipticSolve:
    """
    Solve the discounted system by increasing the penalty level.

    Penalized systems are solved along `n_schedule` with warm starts until the
    sup-norm gap between consecutive levels is below `gap_tol`. Solutions must
    be nondecreasing in `n` up to `10·tol`. The returned field is the last
    penalized solution projected on the switching obstacle.

    !!! example
        ```python
        --8<-- "tests/doc/reference/elliptic/test_solve_elliptic.py"
        ```

    Arguments:
        model: switching model.
        grid: spatial grid.
        beta: discount rate, strictly positive.
        n_schedule: increasing penalty levels, defaults to `1, 2, 4, …, 4096`.
        tol: residual tolerance of each penalized solve.
        gap_tol: Cauchy tolerance between consecutive levels.
        max_iterations: cap on the number of sweeps of each level.

    Returns:
        the discounted solve.

    Raises:
        ergoswitch.exceptions.EllipticException: on invalid schedule or if
            monotonicity in `n` is violated.
        ergoswitch.exceptions.IterationCapException: if a level does not converge.
    """
    _check_beta(beta)
    schedule = [float(n) for n in (n_schedule or DEFAULT_N_SCHEDULE)]
    if any(n < 0 for n in schedule):
        raise EllipticException(f"penalty levels must be nonnegative: {schedule}")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise EllipticException(f"penalty levels must be increasing: {schedule}")

    logger.info(f"Discounted solve of {model.ref} with beta={beta}")
    levels: List[PenalizedSolve] = []
    gaps: List[float] = []
    converged = False
    for n in schedule:
        warm = levels[-1].field if levels else None
        level = solve_penalized(model, grid, beta, n, warm, tol, max_iterations)
        if levels:
            previous = levels[-1].field.values
            decrease = float(np.max(previous - level.field.values))
            if decrease > 10 * tol:
                raise EllipticException(
                    f"penalized solutions decrease by {decrease:.3e} from "
                    f"n={levels[-1].n_penalty} to n={n}"
                )
            gaps.append(level.field.sup_distance(levels[-1].field))
        levels.append(level)
        if gaps and gaps[-1] <= gap_tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"beta={beta}: Cauchy gap tolerance {gap_tol} not reached at "
            f"n={schedule[-1]} (last gap: {gaps[-1] if gaps else math.nan:.3e})"
        )

    penalized = levels[-1].field
    projected = project_obstacle(penalized, model, grid)
    stencil = assemble_stencil(model, grid)
    excess = obstacle_values(projected.values, stencil.cost) - projected.values
    solve = EllipticSolve(
        beta=float(beta),
        field=projected,
        n_schedule=[lv.n_penalty for lv in levels],
        cauchy_gaps=gaps,
        obstacle_residual=float(max(np.max(excess), 0.0)),
        penalty_gap=projected.sup_distance(penalized),
        converged=converged,
        levels=levels,
    )
    logger.info(
        f"beta={beta}: {len(levels)} levels, "
        f"{sum(lv.iterations for lv in levels)} sweeps, "
        f"penalty gap {solve.penalty_gap:.3e}"
    )
    return solve


def estimate_lipschitz(
    field: ValueField, grid: Grid, fraction: float = 0.6
) -> np.ndarray:
    """
    Estimate the Lipschitz constant of each regime on the inner domain.

    Arguments:
        field: field to differentiate.
        grid: spatial grid.
        fraction: share of the domain kept around its center.

    Returns:
        one max slope `|V(x + h, i) - V(x, i)| / h` per regime.
    """
    mask = grid.inner_mask(fraction)
    pairs = mask[:-1] & mask[1:]
    slopes = np.abs(np.diff(field.values, axis=0)) / grid.h
    if not pairs.any():
        return np.zeros(field.m)
    return slopes[pairs].max(axis=0)
