import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ergoswitch.discretization import (
    Grid,
    Stencil,
    ValueField,
    assemble_stencil,
    hamiltonian_values,
    project_obstacle,
    project_values,
)
from ergoswitch.exceptions import ParabolicException
from ergoswitch.model import SwitchingModel


logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9


@dataclass(frozen=True)
class ParabolicRun:
    """
    Record of a parabolic time march.

    Attributes:
        snapshots: list of `(T, V(T))`, times strictly increasing
        averages: list of `(T, V(T, x0, i0) / T)`
        dt: largest time step used
        cfl_bound: explicit stability bound of the scheme
        probe_node: grid node index of the probe
        probe_regime: regime index of the probe
    """

    snapshots: List[Tuple[float, ValueField]]
    averages: List[Tuple[float, float]]
    dt: float
    cfl_bound: float
    probe_node: int
    probe_regime: int
    n_steps: int = field(default=0)

    @property
    def final(self) -> ValueField:
        return self.snapshots[-1][1]

    def probe_values(self) -> List[Tuple[float, float]]:
        """
        List `(T, V(T, x0, i0))` at every snapshot.

        Returns:
            probe values in snapshot order.
        """
        return [
            (t, float(v.values[self.probe_node, self.probe_regime]))
            for t, v in self.snapshots
        ]


def cfl_bound(model: SwitchingModel, grid: Grid) -> float:
    """
    Return the largest stable time step of the explicit scheme.

    `1 / max(σ²/h² + |b|/h)` over nodes, regimes and controls.

    !!! example
        ```python
        --8<-- "tests/doc/reference/parabolic/test_cfl_bound.py"
        ```

    Arguments:
        model: switching model.
        grid: spatial grid.

    Returns:
        time step bound (`inf` without drift nor diffusion).
    """
    return assemble_stencil(model, grid).cfl_bound


def _advance(
    values: np.ndarray, dt: float, stencil: Stencil, reward_shift: float = 0.0
) -> Optional[np.ndarray]:
    explicit = values + dt * (hamiltonian_values(values, stencil) - reward_shift)
    if not np.all(np.isfinite(explicit)):
        return None
    return project_values(explicit, stencil.cost)


def step_parabolic(
    V: ValueField, dt: float, model: SwitchingModel, grid: Grid
) -> ValueField:
    """
    Advance the parabolic system by one explicit Euler step and project.

    `Ṽ = V + dt·H(V)` followed by
    [`project_obstacle`][ergoswitch.discretization.project_obstacle].

    Arguments:
        V: field at time `T`.
        dt: time step, at most the CFL bound.
        model: switching model.
        grid: spatial grid.

    Returns:
        field at time `T + dt`.

    Raises:
        ergoswitch.exceptions.ParabolicException: if `dt` exceeds the CFL bound.
    """
    bound = cfl_bound(model, grid)
    if not dt > 0:
        raise ParabolicException(f"time step must be positive: {dt}")
    if dt > bound * (1 + 1e-12):
        raise ParabolicException(f"time step {dt} exceeds the CFL bound {bound}")
    if V.values.shape != (grid.n_nodes, model.m):
        raise ParabolicException(
            f"field shape {V.values.shape} does not match the model"
        )
    advanced = _advance(V.values, dt, assemble_stencil(model, grid))
    if advanced is None:
        raise ParabolicException("non-finite field after one step")
    return ValueField(advanced)


def _check_schedule(
    T_max: float, snapshot_times: Optional[Sequence[float]]
) -> List[float]:
    if not T_max > 0 or not math.isfinite(T_max):
        raise ParabolicException(f"T_max must be positive and finite: {T_max}")
    times = [float(t) for t in (snapshot_times or [])]
    if any(not 0 < t <= T_max for t in times):
        raise ParabolicException(f"snapshot times must lie in (0, {T_max}]: {times}")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ParabolicException(f"snapshot times must be increasing: {times}")
    if not times or times[-1] < T_max:
        times.append(float(T_max))
    return times


def solve_parabolic(
    model: SwitchingModel,
    grid: Grid,
    T_max: float,
    snapshot_times: Optional[Sequence[float]] = None,
    x0: float = 0.0,
    i0: int = 0,
    initial: Optional[ValueField] = None,
    reward_shift: float = 0.0,
) -> ParabolicRun:
    """
    March the parabolic system from the terminal reward up to `T_max`.

    The march starts from `project_obstacle(g)` and splits every interval
    between snapshot times in equal steps of at most `0.9·cfl_bound`, so
    snapshots are hit exactly.

    !!! example
        ```python
        --8<-- "tests/doc/reference/parabolic/test_solve_parabolic.py"
        ```

    Arguments:
        model: switching model.
        grid: spatial grid.
        T_max: final time.
        snapshot_times: increasing times in `(0, T_max]` where the field is
            recorded, `T_max` is always recorded.
        x0: abscissa of the probe (nearest node is used).
        i0: regime index of the probe.
        initial: starting field, defaults to `g` sampled on the grid.
        reward_shift: constant subtracted from the running reward.

    Returns:
        the run record.

    Raises:
        ergoswitch.exceptions.ParabolicException: on invalid schedule or if the
            field stops being finite.
    """
    times = _check_schedule(T_max, snapshot_times)
    if not 0 <= i0 < model.m:
        raise ParabolicException(f"probe regime out of range: {i0}")
    stencil = assemble_stencil(model, grid)
    bound = stencil.cfl_bound
    start = initial if initial is not None else ValueField(stencil.terminal)
    V = project_obstacle(start, model, grid)
    if V.sup_distance(start) > 0:
        logger.warning(
            f"Initial field of {model.ref} does not satisfy the obstacle, "
            f"projection moved it by {V.sup_distance(start):.3e}"
        )

    k0 = grid.nearest_node(x0)
    logger.info(
        f"Parabolic march of {model.ref} up to T={T_max} (cfl bound {bound:.3e})"
    )
    snapshots: List[Tuple[float, ValueField]] = []
    averages: List[Tuple[float, float]] = []
    values = np.array(V.values)
    t, dt_max, n_steps = 0.0, 0.0, 0
    for target in times:
        span = target - t
        n = max(int(math.ceil(span / (CFL_SAFETY * bound))), 1)
        dt = span / n
        dt_max = max(dt_max, dt)
        for step in range(n):
            advanced = _advance(values, dt, stencil, reward_shift)
            if advanced is None:
                raise ParabolicException(
                    f"non-finite field at T={t + (step + 1) * dt:.6g}"
                )
            values = advanced
        n_steps += n
        t = target
        snapshot = ValueField(values)
        snapshots.append((t, snapshot))
        averages.append((t, float(values[k0, i0]) / t))
        logger.debug(f"Snapshot T={t:g}: V/T={averages[-1][1]:.6f}")

    return ParabolicRun(
        snapshots=snapshots,
        averages=averages,
        dt=dt_max,
        cfl_bound=bound,
        probe_node=k0,
        probe_regime=i0,
        n_steps=n_steps,
    )
