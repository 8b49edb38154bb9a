import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ergoswitch.discretization import (
    Grid,
    ValueField,
    assemble_stencil,
    hamiltonian_all,
    obstacle_values,
)
from ergoswitch.elliptic import (
    DEFAULT_GAP_TOL,
    DEFAULT_TOL,
    EllipticSolve,
    solve_elliptic,
)
from ergoswitch.exceptions import ErgodicException
from ergoswitch.model import SwitchingModel
from ergoswitch.parabolic import ParabolicRun, solve_parabolic


logger = logging.getLogger(__name__)

DEFAULT_BETA_SCHEDULE = (0.5, 0.2, 0.1, 0.05)


@dataclass(frozen=True)
class ErgodicEstimate:
    """
    Ergodic pair extracted by the vanishing discount method.

    Attributes:
        lambda_: `β·V^β(x0, i0)` at the smallest discount rate
        phi: corrector `V^β - V^β(x0, i0)` at the smallest discount rate
        beta_schedule: discount rates, decreasing
        lambda_per_beta: `β·V^β(x0, i0)` for every discount rate
        richardson_lambda: intercept of the least squares fit
            `λ_β ≈ λ + a·β`
        residual: ergodic residual of `(richardson_lambda, phi)`
        reference_node: grid node index where `phi` vanishes
        reference_regime: regime index where `phi` vanishes
    """

    lambda_: float
    phi: ValueField
    beta_schedule: List[float]
    lambda_per_beta: List[float]
    richardson_lambda: float
    residual: float
    reference_node: int
    reference_regime: int
    solves: List[EllipticSolve] = field(default_factory=list, repr=False)


def richardson(betas: Sequence[float], lambdas: Sequence[float]) -> float:
    """
    Extrapolate `λ_β` to `β = 0` assuming a first order dependence on `β`.

    Arguments:
        betas: discount rates.
        lambdas: `β·V^β` estimates.

    Returns:
        intercept of the least squares line (the single value when only one
            discount rate is given).
    """
    if len(betas) == 1:
        return float(lambdas[0])
    design = np.column_stack([np.ones(len(betas)), np.asarray(betas, dtype=float)])
    coefficients, *_ = np.linalg.lstsq(design, np.asarray(lambdas, float), rcond=None)
    return float(coefficients[0])


def _check_schedule(beta_schedule: Sequence[float]) -> List[float]:
    betas = [float(b) for b in beta_schedule]
    if not betas:
        raise ErgodicException("beta schedule cannot be empty")
    if any(not b > 0 for b in betas):
        raise ErgodicException(f"discount rates must be positive: {betas}")
    if any(b >= a for a, b in zip(betas, betas[1:])):
        raise ErgodicException(f"beta schedule must be strictly decreasing: {betas}")
    return betas


def extract_ergodic(
    model: SwitchingModel,
    grid: Grid,
    beta_schedule: Sequence[float] = DEFAULT_BETA_SCHEDULE,
    x0: float = 0.0,
    i0: int = 0,
    n_schedule: Optional[Sequence[float]] = None,
    tol: float = DEFAULT_TOL,
    gap_tol: float = DEFAULT_GAP_TOL,
) -> ErgodicEstimate:
    """
    Extract the ergodic pair `(λ, φ)` along a decreasing discount schedule.

    !!! example
        ```python
        --8<-- "tests/doc/reference/ergodic/test_extract_ergodic.py"
        ```

    Arguments:
        model: switching model.
        grid: spatial grid.
        beta_schedule: strictly decreasing discount rates.
        x0: reference abscissa (nearest node is used).
        i0: reference regime index.
        n_schedule: penalty levels of every discounted solve.
        tol: residual tolerance of every penalized solve.
        gap_tol: Cauchy tolerance of every discounted solve.

    Returns:
        the ergodic estimate.

    Raises:
        ergoswitch.exceptions.ErgodicException: on an invalid schedule or probe.
    """
    betas = _check_schedule(beta_schedule)
    if not 0 <= i0 < model.m:
        raise ErgodicException(f"reference regime out of range: {i0}")
    k0 = grid.nearest_node(x0)
    solves = [
        solve_elliptic(model, grid, beta, n_schedule, tol=tol, gap_tol=gap_tol)
        for beta in betas
    ]
    lambdas = [beta * float(s.field.values[k0, i0]) for beta, s in zip(betas, solves)]
    last = solves[-1].field.values
    phi = ValueField(last - last[k0, i0])
    extrapolated = richardson(betas, lambdas)
    estimate = ErgodicEstimate(
        lambda_=lambdas[-1],
        phi=phi,
        beta_schedule=betas,
        lambda_per_beta=lambdas,
        richardson_lambda=extrapolated,
        residual=ergodic_residual(extrapolated, phi, model, grid),
        reference_node=k0,
        reference_regime=i0,
        solves=solves,
    )
    logger.info(
        f"Ergodic estimate of {model.ref}: lambda={estimate.lambda_:.6f}, "
        f"richardson={estimate.richardson_lambda:.6f}, "
        f"residual={estimate.residual:.3e}"
    )
    return estimate


def ergodic_residual(
    lambda_: float,
    phi: ValueField,
    model: SwitchingModel,
    grid: Grid,
    fraction: float = 0.6,
) -> float:
    """
    Return the inner-domain residual of the ergodic system.

    `sup |min(λ - H(φ)(x, i), φ(x, i) - (Mφ)(x, i))|` over inner nodes and
    regimes.

    Arguments:
        lambda_: ergodic constant.
        phi: corrector.
        model: switching model.
        grid: spatial grid.
        fraction: share of the domain kept around its center.

    Returns:
        residual.
    """
    stencil = assemble_stencil(model, grid)
    drift_branch = lambda_ - hamiltonian_all(phi, model, grid)
    obstacle_branch = phi.values - obstacle_values(phi.values, stencil.cost)
    residual = np.abs(np.minimum(drift_branch, obstacle_branch))
    return float(residual[grid.inner_mask(fraction)].max())


def lambda_probe_spread(
    model: SwitchingModel,
    grid: Grid,
    beta: float,
    probes: Sequence[Tuple[float, int]],
    solve: Optional[EllipticSolve] = None,
    **solver_options,
) -> float:
    """
    Return the spread of `β·V^β` over a set of probes.

    Arguments:
        model: switching model.
        grid: spatial grid.
        beta: discount rate.
        probes: `(x, regime index)` pairs, at least two.
        solve: discounted solve to reuse, computed when not provided.
        **solver_options: forwarded to
            [`solve_elliptic`][ergoswitch.elliptic.solve_elliptic].

    Returns:
        max minus min of `β·V^β` over the probes.

    Raises:
        ergoswitch.exceptions.ErgodicException: with less than two probes.
    """
    if len(probes) < 2:
        raise ErgodicException(f"at least two probes are required: {probes}")
    if any(not 0 <= i < model.m for _, i in probes):
        raise ErgodicException(f"probe regime out of range: {probes}")
    if solve is None:
        solve = solve_elliptic(model, grid, beta, **solver_options)
    elif solve.beta != beta:
        raise ErgodicException(f"solve is for beta={solve.beta}, not {beta}")
    values = [beta * solve.field.values[grid.nearest_node(x), i] for x, i in probes]
    return float(max(values) - min(values))


def compare_parabolic(
    model: SwitchingModel,
    grid: Grid,
    lambda_: float,
    T_max: float,
    x0: float = 0.0,
    i0: int = 0,
    run: Optional[ParabolicRun] = None,
) -> float:
    """
    Return `|V(T_max, x0, i0) / T_max - λ|`.

    Arguments:
        model: switching model.
        grid: spatial grid.
        lambda_: ergodic constant to compare with.
        T_max: horizon of the parabolic march.
        x0: probe abscissa.
        i0: probe regime index.
        run: parabolic run to reuse, its last snapshot must be at `T_max`.

    Returns:
        gap between the long run average and `λ`.
    """
    if run is None:
        run = solve_parabolic(model, grid, T_max, [T_max], x0=x0, i0=i0)
    T, average = run.averages[-1]
    if abs(T - T_max) > 1e-12 * max(T_max, 1.0):
        raise ErgodicException(f"run ends at T={T}, not at {T_max}")
    return abs(average - lambda_)


def long_run_offset(
    run: ParabolicRun, lambda_: float, phi: ValueField
) -> List[Tuple[float, float]]:
    """
    Track `V(T, x0, i0) - λT - φ(x0, i0)` along a parabolic run.

    Stays bounded in `T` when `(λ, φ)` is an ergodic pair.

    Arguments:
        run: parabolic run.
        lambda_: ergodic constant.
        phi: corrector on the grid of the run.

    Returns:
        `(T, offset)` per snapshot.
    """
    anchor = float(phi.values[run.probe_node, run.probe_regime])
    return [(t, v - lambda_ * t - anchor) for t, v in run.probe_values()]


def representation_bounds(
    model: SwitchingModel,
    grid: Grid,
    lambda_: float,
    phi: ValueField,
    T: float,
    fraction: float = 0.6,
) -> Tuple[float, float]:
    """
    Sandwich a corrector between two parabolic marches.

    Marching the system with running reward `f - λ` from `min_j φ(·, j)`
    (resp. `max_j φ(·, j)`) for a time `T` yields `ψ₋` (resp. `ψ₊`), and an
    ergodic pair satisfies `ψ₋ ≤ φ ≤ ψ₊`.

    Arguments:
        model: switching model.
        grid: spatial grid.
        lambda_: ergodic constant.
        phi: corrector.
        T: marching time.
        fraction: share of the domain kept around its center.

    Returns:
        inner-domain sup of `(ψ₋ - φ)⁺` and of `(φ - ψ₊)⁺`.
    """
    mask = grid.inner_mask(fraction)
    lower_start = np.repeat(phi.values.min(axis=1, keepdims=True), model.m, axis=1)
    upper_start = np.repeat(phi.values.max(axis=1, keepdims=True), model.m, axis=1)
    lower = solve_parabolic(
        model, grid, T, initial=ValueField(lower_start), reward_shift=lambda_
    ).final
    upper = solve_parabolic(
        model, grid, T, initial=ValueField(upper_start), reward_shift=lambda_
    ).final
    lower_gap = np.maximum(lower.values - phi.values, 0.0)[mask].max()
    upper_gap = np.maximum(phi.values - upper.values, 0.0)[mask].max()
    return float(lower_gap), float(upper_gap)


def truncation_shift(
    model: SwitchingModel,
    grid: Grid,
    beta: float,
    x0: float = 0.0,
    i0: int = 0,
    **solver_options,
) -> float:
    """
    Measure how `β·V^β(x0, i0)` moves when the domain is doubled.

    Arguments:
        model: switching model.
        grid: spatial grid.
        beta: discount rate.
        x0: probe abscissa.
        i0: probe regime index.
        **solver_options: forwarded to
            [`solve_elliptic`][ergoswitch.elliptic.solve_elliptic].

    Returns:
        `|β·V^β(x0, i0)|` difference between `grid` and `grid.doubled()`.
    """
    values = []
    for g in (grid, grid.doubled()):
        solve = solve_elliptic(model, g, beta, **solver_options)
        values.append(beta * float(solve.field.values[g.nearest_node(x0), i0]))
    shift = abs(values[0] - values[1])
    logger.info(f"Truncation shift of {model.ref} at beta={beta}: {shift:.3e}")
    return shift
