import csv
import functools
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Optional, Tuple, Union

import numpy as np

from ergoswitch.enums import BoundaryMode
from ergoswitch.exceptions import FieldException, GridException, ObstacleException
from ergoswitch.model import SwitchingModel


logger = logging.getLogger(__name__)

INNER_FRACTION = 0.6


class Grid:
    """
    Truncated equispaced spatial grid.

    Nodes are `x_min + k·h` for `k = 0, …, n_nodes - 1`. Grids compare by value
    and are hashable so discrete operators can be cached per grid.

    Attributes:
        x_min (float): first node
        x_max (float): last node
        n_nodes (int): number of nodes
        h (float): spacing between nodes
        boundary_mode (BoundaryMode): rule applied on the first and last node
    """

    def __init__(
        self,
        x_min: float,
        x_max: float,
        n_nodes: int,
        boundary_mode: BoundaryMode = BoundaryMode.NEUMANN_ZERO_SLOPE,
    ) -> None:
        if not isinstance(x_min, (int, float)) or not isinstance(x_max, (int, float)):
            raise GridException(f"grid bounds must be numbers: ({x_min}, {x_max})")
        if not (math.isfinite(x_min) and math.isfinite(x_max)):
            raise GridException(f"grid bounds must be finite: ({x_min}, {x_max})")
        if not x_min < x_max:
            raise GridException(f"x_min ({x_min}) must be lower than x_max ({x_max})")
        if isinstance(n_nodes, bool) or not isinstance(n_nodes, (int, np.integer)):
            raise GridException(f"n_nodes must be an int: {n_nodes!r}")
        if n_nodes < 3:
            raise GridException(f"a grid needs at least 3 nodes (got {n_nodes})")
        if isinstance(boundary_mode, str):
            try:
                boundary_mode = BoundaryMode(boundary_mode)
            except ValueError:
                raise GridException(
                    f"unknown boundary mode {boundary_mode!r}, allowed: "
                    f"{', '.join(b.value for b in BoundaryMode)}"
                )
        if not isinstance(boundary_mode, BoundaryMode):
            raise GridException(f"invalid boundary mode: {boundary_mode!r}")

        self._x_min = float(x_min)
        self._x_max = float(x_max)
        self._n_nodes = int(n_nodes)
        self._boundary_mode = boundary_mode
        self._nodes = self._x_min + np.arange(self._n_nodes) * self.h
        self._nodes.setflags(write=False)

    @property
    def x_min(self) -> float:
        return self._x_min

    @property
    def x_max(self) -> float:
        return self._x_max

    @property
    def n_nodes(self) -> int:
        return self._n_nodes

    @property
    def boundary_mode(self) -> BoundaryMode:
        return self._boundary_mode

    @property
    def h(self) -> float:
        return (self._x_max - self._x_min) / (self._n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        """
        Return the grid nodes.

        Returns:
            read-only array of the `n_nodes` node abscissas.
        """
        return self._nodes

    def node(self, k: int) -> float:
        """
        Return the abscissa of node `k`.

        !!! example
            ```python
            --8<-- "tests/doc/reference/discretization/test_build_grid.py"
            ```
        """
        if not 0 <= k < self._n_nodes:
            raise GridException(f"node index out of range: {k}")
        return self._x_min + k * self.h

    def nearest_node(self, x: float) -> int:
        """
        Return the index of the node closest to `x` (lowest index on ties).

        Arguments:
            x: abscissa.

        Returns:
            node index.
        """
        return int(np.argmin(np.abs(self._nodes - x)))

    def inner_mask(self, fraction: float = INNER_FRACTION) -> np.ndarray:
        """
        Flag the nodes lying in the central part of the domain.

        Arguments:
            fraction: share of the domain width kept around its center.

        Returns:
            boolean array over nodes.
        """
        center = 0.5 * (self._x_min + self._x_max)
        radius = 0.5 * fraction * (self._x_max - self._x_min)
        return np.abs(self._nodes - center) <= radius + 1e-9 * self.h

    def doubled(self) -> "Grid":
        """
        Build a grid twice as wide with the same spacing and center.

        Returns:
            new grid with `2·(n_nodes - 1) + 1` nodes.
        """
        center = 0.5 * (self._x_min + self._x_max)
        half = self._x_max - self._x_min
        return Grid(
            center - half,
            center + half,
            2 * (self._n_nodes - 1) + 1,
            self._boundary_mode,
        )

    def _key(self) -> Tuple[float, float, int, BoundaryMode]:
        return (self._x_min, self._x_max, self._n_nodes, self._boundary_mode)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return (
            f"Grid(x_min={self._x_min}, x_max={self._x_max}, "
            f"n_nodes={self._n_nodes}, boundary_mode={self._boundary_mode.value})"
        )


def build_grid(
    x_min: float,
    x_max: float,
    n_nodes: int,
    boundary_mode: Union[BoundaryMode, str] = BoundaryMode.NEUMANN_ZERO_SLOPE,
) -> Grid:
    """
    Build an equispaced grid.

    !!! example
        ```python
        --8<-- "tests/doc/reference/discretization/test_build_grid.py"
        ```

    Arguments:
        x_min: first node.
        x_max: last node, strictly above `x_min`.
        n_nodes: number of nodes, at least 3.
        boundary_mode: boundary rule, as an enum member or its value.

    Returns:
        the new grid.

    Raises:
        ergoswitch.exceptions.GridException: on invalid arguments.
    """
    grid = Grid(x_min, x_max, n_nodes, boundary_mode)  # type: ignore
    logger.debug(f"New grid: {grid}")
    return grid


class ValueField:
    """
    Real values indexed by (grid node, regime).

    Houses the parabolic solution, the discounted and penalized solutions and
    the ergodic corrector. Values are finite; the obstacle of a single-regime
    model is the only field allowed to hold `-inf`.

    Attributes:
        values (np.ndarray): read-only array of shape `(n_nodes, m)`
    """

    def __init__(self, values: Any, allow_sentinel: bool = False) -> None:
        array = np.array(values, dtype=float)
        if array.ndim == 1:
            array = array[:, None]
        if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
            raise FieldException(f"a field is a (nodes, regimes) array: {array.shape}")
        if allow_sentinel:
            invalid = np.isnan(array) | (array == np.inf)
        else:
            invalid = ~np.isfinite(array)
        if invalid.any():
            k, i = np.unravel_index(int(np.argmax(invalid)), array.shape)
            raise FieldException(
                f"non-finite value {array[k, i]} at node {k}, regime {i + 1}"
            )
        array.setflags(write=False)
        self._values = array

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_nodes(self) -> int:
        return self._values.shape[0]

    @property
    def m(self) -> int:
        return self._values.shape[1]

    @classmethod
    def constant(cls, grid: Grid, levels: Any) -> "ValueField":
        """
        Build a field constant in `x`.

        Arguments:
            grid: grid of the field.
            levels: one value per regime.

        Returns:
            field of shape `(grid.n_nodes, len(levels))`.
        """
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        return cls(np.tile(levels, (grid.n_nodes, 1)))

    @classmethod
    def from_function(cls, grid: Grid, m: int, fn: Any) -> "ValueField":
        """
        Sample `fn(x, i)` on the grid nodes for every regime.

        Arguments:
            grid: grid of the field.
            m: number of regimes.
            fn: vectorised map of (nodes, regime index).

        Returns:
            sampled field.
        """
        x = grid.nodes
        columns = [
            np.broadcast_to(np.asarray(fn(x, i), float), x.shape) for i in range(m)
        ]
        return cls(np.column_stack(columns))

    def sup_distance(
        self, other: "ValueField", mask: Optional[np.ndarray] = None
    ) -> float:
        """
        Return the sup-norm distance to another field.

        Arguments:
            other: field of the same shape.
            mask: optional boolean mask over nodes.

        Returns:
            max of `|self - other|` over masked nodes and all regimes.
        """
        if other.values.shape != self._values.shape:
            raise FieldException(
                f"shape mismatch: {self._values.shape} vs {other.values.shape}"
            )
        diff = np.abs(self._values - other.values)
        if mask is not None:
            diff = diff[mask]
        return float(diff.max()) if diff.size else 0.0

    def to_csv(self, path: str, grid: Grid) -> None:
        """
        Write the field as `x,regime_1,…,regime_m` with 17 significant digits.

        Arguments:
            path: target file path, parent folders are created.
            grid: grid of the field.
        """
        if grid.n_nodes != self.n_nodes:
            raise FieldException(
                f"field has {self.n_nodes} nodes, grid has {grid.n_nodes}"
            )
        folder = os.path.dirname(path)
        if folder and not os.path.exists(folder):
            os.makedirs(folder)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["x"] + [f"regime_{i + 1}" for i in range(self.m)])
            for x, row in zip(grid.nodes, self._values):
                writer.writerow([f"{x:.17g}"] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path: str) -> Tuple[np.ndarray, "ValueField"]:
        """
        Read a field written by [`to_csv`][ergoswitch.discretization.ValueField.to_csv].

        Arguments:
            path: source file path.

        Returns:
            node abscissas and the field.

        Raises:
            ergoswitch.exceptions.FieldException: if the file is malformed.
        """
        if not os.path.isfile(path):
            raise FieldException(f"field file not found: {path}")
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "x" or len(header) < 2:
                raise FieldException(f"invalid field header in {path}: {header}")
            expected = [f"regime_{i + 1}" for i in range(len(header) - 1)]
            if header[1:] != expected:
                raise FieldException(f"invalid regime columns in {path}: {header}")
            try:
                rows = np.array([[float(v) for v in row] for row in reader if row])
            except ValueError as e:
                raise FieldException(f"non numeric value in {path}: {e}") from e
        if rows.ndim != 2 or rows.shape[1] != len(header):
            raise FieldException(f"ragged rows in {path}")
        return rows[:, 0], cls(rows[:, 1:])

    def __repr__(self) -> str:
        return f"ValueField(n_nodes={self.n_nodes}, m={self.m})"


@dataclass(frozen=True)
class Stencil:
    """
    Tabulated upwind generator of every (node, regime, control).

    The discrete generator reads
    `lower·(V[k-1] - V[k]) + upper·(V[k+1] - V[k])`, with the boundary rule
    already folded into `lower[0]` and `upper[-1]` (both zero).

    Attributes:
        lower: coefficients of the backward difference, shape `(N, m, p)`
        upper: coefficients of the forward difference, shape `(N, m, p)`
        reward: running reward `f`, shape `(N, m, p)`
        cost: switching costs `c(x, i, j)`, shape `(N, m, m)`
        terminal: terminal reward `g`, shape `(N, m)`
        cfl_bound: largest stable explicit time step
    """

    lower: np.ndarray
    upper: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    terminal: np.ndarray
    cfl_bound: float

    @property
    def diagonal(self) -> np.ndarray:
        return -(self.lower + self.upper)

    def is_monotone(self) -> bool:
        """
        Check the off-diagonal coefficients are nonnegative.

        Returns:
            `True` if the scheme is monotone.
        """
        return bool(np.all(self.lower >= 0) and np.all(self.upper >= 0))


@functools.lru_cache(maxsize=32)
def assemble_stencil(model: SwitchingModel, grid: Grid) -> Stencil:
    """
    Tabulate the monotone upwind generator and the rewards of a model on a grid.

    Drift uses a forward difference where `b > 0` and a backward one where
    `b < 0`; diffusion uses the central second difference with coefficient
    `½σ²`. On boundary rows the ghost node is `V[0]` (zero slope) or
    `2V[0] - V[1]` (linear extrapolation), mirrored at the right end.

    Arguments:
        model: switching model.
        grid: spatial grid.

    Returns:
        the stencil, cached per (model, grid).
    """
    x, h = grid.nodes, grid.h
    shape = (grid.n_nodes, model.m, model.p)
    lower, upper, reward = np.empty(shape), np.empty(shape), np.empty(shape)
    rate = 0.0
    for i in range(model.m):
        for l in range(model.p):
            b = model.drift(x, i, l)
            sigma = model.diffusion(x, i, l)
            a = 0.5 * sigma ** 2
            lower[:, i, l] = a / h ** 2 + np.maximum(-b, 0.0) / h
            upper[:, i, l] = a / h ** 2 + np.maximum(b, 0.0) / h
            reward[:, i, l] = model.running_reward(x, i, l)
            rate = max(rate, float(np.max(sigma ** 2 / h ** 2 + np.abs(b) / h)))

    if grid.boundary_mode is BoundaryMode.DIRICHLET_EXTRAPOLATE:
        upper[0] -= lower[0]
        lower[-1] -= upper[-1]
    lower[0] = 0.0
    upper[-1] = 0.0

    terminal = np.column_stack([model.terminal_reward(x, i) for i in range(model.m)])
    stencil = Stencil(
        lower=lower,
        upper=upper,
        reward=reward,
        cost=model.cost_matrix(x),
        terminal=terminal,
        cfl_bound=1.0 / rate if rate > 0 else math.inf,
    )
    for array in (stencil.lower, stencil.upper, stencil.reward, stencil.cost):
        array.setflags(write=False)
    if not stencil.is_monotone():
        logger.warning(f"Stencil of {model.ref} on {grid} is not monotone")
    return stencil


def _differences(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    backward = np.zeros_like(values)
    forward = np.zeros_like(values)
    backward[1:] = values[:-1] - values[1:]
    forward[:-1] = values[1:] - values[:-1]
    return backward, forward


def _check_shape(V: ValueField, model: SwitchingModel, grid: Grid) -> None:
    if V.values.shape != (grid.n_nodes, model.m):
        raise FieldException(
            f"field of shape {V.values.shape} does not match "
            f"({grid.n_nodes} nodes, {model.m} regimes)"
        )


def apply_generator(
    V: ValueField, model: SwitchingModel, grid: Grid, i: int, l: int
) -> np.ndarray:
    """
    Apply the discrete generator of regime `i` and control `l` to a field.

    !!! example
        ```python
        --8<-- "tests/doc/reference/discretization/test_apply_generator.py"
        ```

    Arguments:
        V: field to differentiate.
        model: switching model.
        grid: spatial grid.
        i: regime index.
        l: control index.

    Returns:
        array over nodes.
    """
    _check_shape(V, model, grid)
    stencil = assemble_stencil(model, grid)
    backward, forward = _differences(V.values[:, i])
    return stencil.lower[:, i, l] * backward + stencil.upper[:, i, l] * forward


def _controlled(values: np.ndarray, stencil: Stencil) -> np.ndarray:
    backward, forward = _differences(values)
    return (
        stencil.lower * backward[:, :, None]
        + stencil.upper * forward[:, :, None]
        + stencil.reward
    )


def hamiltonian_values(values: np.ndarray, stencil: Stencil) -> np.ndarray:
    """Return the hamiltonian of every regime from a raw `(N, m)` array."""
    return _controlled(values, stencil).min(axis=2)


def controlled_values(V: ValueField, model: SwitchingModel, grid: Grid) -> np.ndarray:
    """
    Tabulate `L^{i,u}V + f(x, i, u)` for every regime and control.

    Arguments:
        V: field to differentiate.
        model: switching model.
        grid: spatial grid.

    Returns:
        array of shape `(n_nodes, m, p)`.
    """
    _check_shape(V, model, grid)
    return _controlled(V.values, assemble_stencil(model, grid))


def hamiltonian(V: ValueField, model: SwitchingModel, grid: Grid, i: int) -> np.ndarray:
    """
    Return the worst case over controls of the generator plus the running reward.

    The minimum over the control set is taken pointwise; ties go to the lowest
    control index.

    Arguments:
        V: field to differentiate.
        model: switching model.
        grid: spatial grid.
        i: regime index.

    Returns:
        array over nodes.
    """
    values = controlled_values(V, model, grid)[:, i, :]
    best = np.argmin(values, axis=1)
    return values[np.arange(values.shape[0]), best]


def hamiltonian_all(V: ValueField, model: SwitchingModel, grid: Grid) -> np.ndarray:
    """Return the hamiltonian of every regime as a `(n_nodes, m)` array."""
    _check_shape(V, model, grid)
    return hamiltonian_values(V.values, assemble_stencil(model, grid))


def obstacle_values(values: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """
    Compute `max_{j≠i}[V(x, j) - c(x, i, j)]` on raw arrays.

    Arguments:
        values: `(N, m)` array.
        cost: `(N, m, m)` array of switching costs.

    Returns:
        `(N, m)` array, `-inf` where no other regime exists.
    """
    m = values.shape[1]
    candidates = values[:, None, :] - cost
    candidates[:, np.arange(m), np.arange(m)] = -np.inf
    return candidates.max(axis=2)


def switching_obstacle(V: ValueField, model: SwitchingModel, grid: Grid) -> ValueField:
    """
    Return the switching obstacle `(MV)(x, i) = max_{j≠i}[V(x, j) - c(x, i, j)]`.

    For a single regime the obstacle is inactive and the field holds `-inf`.

    Arguments:
        V: field.
        model: switching model.
        grid: spatial grid.

    Returns:
        obstacle field.
    """
    _check_shape(V, model, grid)
    stencil = assemble_stencil(model, grid)
    return ValueField(obstacle_values(V.values, stencil.cost), allow_sentinel=True)


def project_values(values: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """
    Gauss–Seidel obstacle projection on raw arrays.

    Arguments:
        values: `(N, m)` array to lift.
        cost: `(N, m, m)` array of switching costs.

    Returns:
        smallest array above `values` satisfying the obstacle.

    Raises:
        ergoswitch.exceptions.ObstacleException: if sweeps do not settle within
            `m + 1` sweeps.
    """
    m = values.shape[1]
    projected = np.array(values, dtype=float)
    if m == 1:
        return projected
    for _ in range(m + 1):
        changed = False
        for i in range(m):
            others = projected - cost[:, i, :]
            others[:, i] = -np.inf
            candidate = np.maximum(values[:, i], others.max(axis=1))
            if np.any(candidate != projected[:, i]):
                changed = True
                projected[:, i] = candidate
        if not changed:
            return projected
    raise ObstacleException("no-free-loop violated numerically")


def project_obstacle(V: ValueField, model: SwitchingModel, grid: Grid) -> ValueField:
    """
    Lift a field to the smallest field above it that satisfies the obstacle.

    Sweeps `W(x, i) ← max(V(x, i), max_{j≠i}[W(x, j) - c(x, i, j)])` until no
    entry changes.

    !!! example
        ```python
        --8<-- "tests/doc/reference/discretization/test_project_obstacle.py"
        ```

    Arguments:
        V: field to project.
        model: switching model (costs must have no free loop).
        grid: spatial grid.

    Returns:
        projected field.

    Raises:
        ergoswitch.exceptions.ObstacleException: if sweeps do not settle.
    """
    _check_shape(V, model, grid)
    stencil = assemble_stencil(model, grid)
    return ValueField(project_values(V.values, stencil.cost))

