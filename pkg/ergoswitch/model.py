import csv
import itertools
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np
from scipy.stats import qmc  # type: ignore

from ergoswitch.exceptions import ModelException
from ergoswitch.mixins import RefMixin


if TYPE_CHECKING:  # pragma: no cover
    from ergoswitch.discretization import Grid


logger = logging.getLogger(__name__)

CoefficientFn = Callable[[np.ndarray, int, float], Any]
CostFn = Callable[[np.ndarray, int, int], Any]
TerminalFn = Callable[[np.ndarray, int], Any]

DISSIPATIVITY_TOLERANCE = 1e-10
LIPSCHITZ_TOLERANCE = 1e-10
TERMINAL_TOLERANCE = 1e-12
DEFAULT_DOMAIN = (-5.0, 5.0)


class SwitchingModel(RefMixin):
    """
    Robust switching control model in dimension one.

    A [`SwitchingModel`][ergoswitch.model.SwitchingModel] bundles the
    coefficients of the controlled diffusion, the rewards and the switching costs
    of the regimes. Regimes and control points are addressed by their 0-based
    index.

    Coefficients are vectorised callables receiving an array of states:

     - `drift(x, i, u)` and `diffusion(x, i, u)`: drift `b` and volatility `σ`
     - `running_reward(x, i, u)`: running reward `f`
     - `switch_cost(x, i, j)`: cost `c` of a switch from `i` to `j`
     - `terminal_reward(x, i)`: terminal reward `g`

    Attributes:
        m (int): number of regimes
        controls (Tuple[float, ...]): discretized control set
        gamma (float): dissipativity constant
        lipschitz_f (float): declared Lipschitz constant of `f` and `c` in `x`
        cost_constant_in_x (bool): switching costs do not depend on `x`
        dim (int): state dimension (always 1)

        ref (str): reference of this instance
            (see `ergoswitch.mixins.ref.RefMixin`)
    """

    ref_prefix = "model-"

    def __init__(
        self,
        m: int,
        controls: Sequence[float],
        drift: CoefficientFn,
        diffusion: CoefficientFn,
        running_reward: CoefficientFn,
        switch_cost: CostFn,
        terminal_reward: TerminalFn,
        gamma: float,
        lipschitz_f: float,
        cost_constant_in_x: bool = False,
        dim: int = 1,
        ref: Optional[str] = None,
    ) -> None:
        """
        Create a new switching model.

        Arguments:
            m: number of regimes, at least 1.
            controls: non empty list of control points.
            drift: drift map `b`.
            diffusion: volatility map `σ`.
            running_reward: running reward map `f`.
            switch_cost: switching cost map `c`.
            terminal_reward: terminal reward map `g`.
            gamma: dissipativity constant, strictly positive.
            lipschitz_f: Lipschitz constant of `f` and `c`, strictly positive.
            cost_constant_in_x: flag switching costs that do not depend on `x`.
            dim: state dimension, only `1` is supported.
            ref: model code name.

        Raises:
            ergoswitch.exceptions.ModelException: if the model is malformed.
        """
        RefMixin.__init__(self, ref)
        if dim != 1:
            raise ModelException(f"only dimension 1 is supported (got {dim})")
        if not isinstance(m, (int, np.integer)) or m < 1:
            raise ModelException(f"number of regimes must be a positive int: {m}")
        controls = tuple(float(u) for u in controls)
        if not controls:
            raise ModelException("control set cannot be empty")
        if not all(math.isfinite(u) for u in controls):
            raise ModelException(f"control points must be finite: {controls}")
        for name, value in (("gamma", gamma), ("lipschitz_f", lipschitz_f)):
            if not isinstance(value, (int, float)) or not value > 0:
                raise ModelException(f"{name} must be strictly positive: {value}")
        for name, fn in (
            ("drift", drift),
            ("diffusion", diffusion),
            ("running_reward", running_reward),
            ("switch_cost", switch_cost),
            ("terminal_reward", terminal_reward),
        ):
            if not callable(fn):
                raise ModelException(f"{name} must be callable")

        self._dim = dim
        self._m = int(m)
        self._controls = controls
        self._drift = drift
        self._diffusion = diffusion
        self._running_reward = running_reward
        self._switch_cost = switch_cost
        self._terminal_reward = terminal_reward
        self._gamma = float(gamma)
        self._lipschitz_f = float(lipschitz_f)
        self._cost_constant_in_x = bool(cost_constant_in_x)
        logger.info(
            f"New model {self.ref}: m={self.m}, p={self.p}, gamma={self.gamma}"
        )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def m(self) -> int:
        return self._m

    @property
    def controls(self) -> Tuple[float, ...]:
        return self._controls

    @property
    def p(self) -> int:
        """
        Return the number of control points.

        Returns:
            size of the discretized control set.
        """
        return len(self._controls)

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def lipschitz_f(self) -> float:
        return self._lipschitz_f

    @property
    def cost_constant_in_x(self) -> bool:
        return self._cost_constant_in_x

    def _evaluate(self, name: str, fn: Callable, x: Any, *args: Any) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        try:
            values = np.broadcast_to(
                np.asarray(fn(x, *args), dtype=float), x.shape
            ).copy()
        except (TypeError, ValueError) as e:
            raise ModelException(f"cannot evaluate {name}: {e}") from e
        if not np.all(np.isfinite(values)):
            k = int(np.argmin(np.isfinite(values)))
            raise ModelException(
                f"non-finite {name} at x={float(x[k])!r} (arguments {args!r})"
            )
        return values

    def drift(self, x: Any, i: int, l: int) -> np.ndarray:
        """
        Evaluate the drift `b(x, i, u_l)`.

        Arguments:
            x: state or array of states.
            i: regime index.
            l: control index.

        Returns:
            array of drifts with the shape of `x`.

        Raises:
            ergoswitch.exceptions.ModelException: on a non-finite evaluation.
        """
        return self._evaluate("drift", self._drift, x, i, self._controls[l])

    def diffusion(self, x: Any, i: int, l: int) -> np.ndarray:
        """Evaluate the volatility `σ(x, i, u_l)`."""
        return self._evaluate("diffusion", self._diffusion, x, i, self._controls[l])

    def running_reward(self, x: Any, i: int, l: int) -> np.ndarray:
        """Evaluate the running reward `f(x, i, u_l)`."""
        return self._evaluate(
            "running_reward", self._running_reward, x, i, self._controls[l]
        )

    def switch_cost(self, x: Any, i: int, j: int) -> np.ndarray:
        """Evaluate the switching cost `c(x, i, j)`."""
        return self._evaluate("switch_cost", self._switch_cost, x, i, j)

    def terminal_reward(self, x: Any, i: int) -> np.ndarray:
        """Evaluate the terminal reward `g(x, i)`."""
        return self._evaluate("terminal_reward", self._terminal_reward, x, i)

    def cost_matrix(self, x: Any) -> np.ndarray:
        """
        Tabulate the switching costs.

        Arguments:
            x: state or array of states.

        Returns:
            array of shape `(len(x), m, m)` holding `c(x, i, j)`.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        costs = np.empty((x.size, self.m, self.m))
        for i, j in itertools.product(range(self.m), repeat=2):
            costs[:, i, j] = self.switch_cost(x, i, j)
        return costs

    def max_cost(self, x: Any = 0.0) -> float:
        """
        Return the largest switching cost, read at `x`.

        Arguments:
            x: state or array of states where costs are tabulated.

        Returns:
            largest switching cost (0 for a single regime).
        """
        return float(np.max(self.cost_matrix(x)))

    def reward_envelope(
        self, x_min: float, x_max: float, n_samples: int = 401
    ) -> float:
        """
        Estimate the largest `|f|` over a domain.

        Arguments:
            x_min: lower bound of the domain.
            x_max: upper bound of the domain.
            n_samples: number of equispaced sample points.

        Returns:
            max of `|f(x, i, u)|` over sample points, regimes and controls.
        """
        x = np.linspace(x_min, x_max, n_samples)
        return max(
            float(np.max(np.abs(self.running_reward(x, i, l))))
            for i in range(self.m)
            for l in range(self.p)
        )

    def frozen(self, i: int) -> "SwitchingModel":
        """
        Build the single-regime model that never leaves regime `i`.

        Arguments:
            i: regime index to freeze.

        Returns:
            model with one regime sharing the coefficients of regime `i`.
        """
        if not 0 <= i < self.m:
            raise ModelException(f"regime index out of range: {i}")
        return SwitchingModel(
            m=1,
            controls=self.controls,
            drift=lambda x, _, u: self._drift(x, i, u),
            diffusion=lambda x, _, u: self._diffusion(x, i, u),
            running_reward=lambda x, _, u: self._running_reward(x, i, u),
            switch_cost=lambda x, _i, _j: 0.0,
            terminal_reward=lambda x, _: self._terminal_reward(x, i),
            gamma=self.gamma,
            lipschitz_f=self.lipschitz_f,
            cost_constant_in_x=True,
            ref=f"{self.ref}-regime{i + 1}",
        )

    def __repr__(self) -> str:
        return f"SwitchingModel(ref={self.ref!r}, m={self.m}, p={self.p})"


@dataclass(frozen=True)
class ValidationReport:
    """
    Outcome of a numerical audit of a model assumption.

    Attributes:
        name: name of the check
        passed: `True` iff `worst_violation <= tolerance`
        worst_violation: largest violation magnitude found (nonnegative)
        tolerance: declared tolerance of the check
        witness: description of the point where the worst violation occurs
    """

    name: str
    passed: bool
    worst_violation: float
    tolerance: float
    witness: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_violation(
        cls,
        name: str,
        violation: float,
        tolerance: float,
        witness: Optional[Dict[str, Any]] = None,
    ) -> "ValidationReport":
        violation = max(float(violation), 0.0)
        return cls(
            name=name,
            passed=not violation > tolerance,
            worst_violation=violation,
            tolerance=tolerance,
            witness=witness or {},
        )

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (
            f"[{status}] {self.name}: worst violation {self.worst_violation:.6e} "
            f"(tolerance {self.tolerance:g})"
        )
        if not self.passed and self.witness:
            details = ", ".join(f"{k}={v}" for k, v in self.witness.items())
            text += f" at {details}"
        return text


def _sample_pairs(
    samples: int, seed: int, domain: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw deterministic Sobol pairs followed by seeded uniform pairs."""
    if samples < 1:
        raise ModelException(f"samples must be at least 1: {samples}")
    low, high = domain
    if not low < high:
        raise ModelException(f"invalid sampling domain: {domain}")
    sobol = qmc.Sobol(d=2, scramble=False)
    points = sobol.random_base2(m=max(int(math.ceil(math.log2(samples))), 0))
    points = qmc.scale(points[:samples], [low, low], [high, high])
    rng = np.random.default_rng(seed)
    randoms = rng.uniform(low, high, size=(samples, 2))
    pairs = np.vstack([points, randoms])
    return pairs[:, 0], pairs[:, 1]


def check_dissipativity(
    model: SwitchingModel,
    samples: int,
    seed: int,
    domain: Tuple[float, float] = DEFAULT_DOMAIN,
) -> ValidationReport:
    """
    Audit the dissipativity of the drift and volatility on sampled pairs.

    Evaluates `(x - x')(b(x) - b(x')) + ½|σ(x) - σ(x')|² + γ|x - x'|²` for every
    regime and control point. The check passes iff the maximum is below `1e-10`.

    !!! example
        ```python
        --8<-- "tests/doc/reference/model/test_check_dissipativity.py"
        ```

    Arguments:
        model: model to audit.
        samples: number of low-discrepancy pairs, and of random pairs.
        seed: seed of the random pairs.
        domain: interval where pairs are sampled.

    Returns:
        validation report, witness holds the worst pair.

    Raises:
        ergoswitch.exceptions.ModelException: on a non-finite coefficient.
    """
    x, xp = _sample_pairs(samples, seed, domain)
    worst, witness = -math.inf, {}
    dx = x - xp
    for i in range(model.m):
        for l in range(model.p):
            lhs = (
                dx * (model.drift(x, i, l) - model.drift(xp, i, l))
                + 0.5 * (model.diffusion(x, i, l) - model.diffusion(xp, i, l)) ** 2
                + model.gamma * dx ** 2
            )
            k = int(np.argmax(lhs))
            if lhs[k] > worst:
                worst = float(lhs[k])
                witness = {
                    "x": float(x[k]),
                    "x_prime": float(xp[k]),
                    "regime": i + 1,
                    "control": model.controls[l],
                }
    report = ValidationReport.from_violation(
        "dissipativity", worst, DISSIPATIVITY_TOLERANCE, witness
    )
    logger.debug(str(report))
    return report


def _simple_cycles(m: int) -> List[Tuple[int, ...]]:
    """List the simple cycles of the complete graph on `m` regimes, once each."""
    cycles = []
    for k in range(2, m + 1):
        for nodes in itertools.combinations(range(m), k):
            head, rest = nodes[0], nodes[1:]
            for perm in itertools.permutations(rest):
                cycles.append((head,) + perm)
    return cycles


def check_no_free_loop(
    model: SwitchingModel,
    samples: int,
    domain: Tuple[float, float] = DEFAULT_DOMAIN,
    min_cycle_cost: float = 1e-12,
) -> ValidationReport:
    """
    Audit the switching costs: zero diagonal, nonnegativity, no free loop.

    Every simple cycle `i₁ → … → i_k → i₁` must cost at least `min_cycle_cost`
    at every sampled state. Sample states are equispaced so the report does not
    depend on `samples` when costs are constant in `x`.

    Arguments:
        model: model to audit.
        samples: number of sampled states.
        domain: interval where states are sampled.
        min_cycle_cost: smallest accepted cycle cost.

    Returns:
        validation report with a zero tolerance.
    """
    if samples < 1:
        raise ModelException(f"samples must be at least 1: {samples}")
    x = np.linspace(domain[0], domain[1], samples)
    costs = model.cost_matrix(x)
    worst, witness = 0.0, {}

    diagonal = np.abs(np.diagonal(costs, axis1=1, axis2=2))
    if diagonal.size and diagonal.max() > worst:
        k, i = np.unravel_index(int(np.argmax(diagonal)), diagonal.shape)
        worst = float(diagonal[k, i])
        witness = {"x": float(x[k]), "diagonal": i + 1}

    negative = -costs
    if negative.max() > worst:
        k, i, j = np.unravel_index(int(np.argmax(negative)), negative.shape)
        worst = float(negative[k, i, j])
        witness = {"x": float(x[k]), "negative_cost": f"{i + 1}->{j + 1}"}

    for cycle in _simple_cycles(model.m):
        cycle_cost = sum(
            costs[:, a, b] for a, b in zip(cycle, cycle[1:] + cycle[:1])
        )
        deficit = min_cycle_cost - cycle_cost
        k = int(np.argmax(deficit))
        if deficit[k] > worst:
            worst = float(deficit[k])
            witness = {
                "x": float(x[k]),
                "cycle": "->".join(str(c + 1) for c in cycle + cycle[:1]),
                "cycle_cost": float(cycle_cost[k]),
            }

    report = ValidationReport.from_violation("no_free_loop", worst, 0.0, witness)
    logger.debug(str(report))
    return report


def check_terminal_consistency(model: SwitchingModel, grid: "Grid") -> ValidationReport:
    """
    Check `g(x, i) >= max_{j≠i}[g(x, j) - c(x, i, j)]` at every grid node.

    Arguments:
        model: model to audit.
        grid: nodes where the inequality is checked.

    Returns:
        validation report holding the worst deficit.
    """
    x = grid.nodes
    g = np.column_stack([model.terminal_reward(x, i) for i in range(model.m)])
    costs = model.cost_matrix(x)
    worst, witness = 0.0, {}
    for i in range(model.m):
        for j in range(model.m):
            if j == i:
                continue
            deficit = g[:, j] - costs[:, i, j] - g[:, i]
            k = int(np.argmax(deficit))
            if deficit[k] > worst:
                worst = float(deficit[k])
                witness = {"x": float(x[k]), "regime": i + 1, "target": j + 1}
    report = ValidationReport.from_violation(
        "terminal_consistency", worst, TERMINAL_TOLERANCE, witness
    )
    logger.debug(str(report))
    return report


def check_lipschitz(
    model: SwitchingModel,
    samples: int,
    seed: int,
    domain: Tuple[float, float] = DEFAULT_DOMAIN,
) -> ValidationReport:
    """
    Audit the declared Lipschitz constant of the reward and the switching costs.

    On sampled pairs, computes `(|f(x) - f(x')| + |c(x, i, j) - c(x', i, j)|) /
    |x - x'|` and compares it with `model.lipschitz_f`.

    Arguments:
        model: model to audit.
        samples: number of low-discrepancy pairs, and of random pairs.
        seed: seed of the random pairs.
        domain: interval where pairs are sampled.

    Returns:
        validation report holding the worst excess over the declared constant.
    """
    x, xp = _sample_pairs(samples, seed, domain)
    distinct = np.abs(x - xp) > 1e-9
    x, xp = x[distinct], xp[distinct]
    distance = np.abs(x - xp)
    cost_slope = np.abs(model.cost_matrix(x) - model.cost_matrix(xp))
    worst, witness = 0.0, {}
    for i in range(model.m):
        worst_cost = cost_slope[:, i, :].max(axis=1)
        for l in range(model.p):
            slope = (
                np.abs(model.running_reward(x, i, l) - model.running_reward(xp, i, l))
                + worst_cost
            ) / distance
            excess = slope - model.lipschitz_f
            if excess.size == 0:
                continue
            k = int(np.argmax(excess))
            if excess[k] > worst:
                worst = float(excess[k])
                witness = {
                    "x": float(x[k]),
                    "x_prime": float(xp[k]),
                    "regime": i + 1,
                    "control": model.controls[l],
                }
    report = ValidationReport.from_violation(
        "lipschitz", worst, LIPSCHITZ_TOLERANCE, witness
    )
    logger.debug(str(report))
    return report


def validate_model(
    model: SwitchingModel, grid: "Grid", samples: int = 256, seed: int = 0
) -> List[ValidationReport]:
    """
    Run every model audit on the grid domain.

    Arguments:
        model: model to audit.
        grid: grid of the experiment, its bounds are the sampling domain.
        samples: number of sampled pairs (or states).
        seed: seed of the random pairs.

    Returns:
        reports of dissipativity, no free loop, terminal consistency and
            Lipschitz checks, in that order.
    """
    domain = (grid.x_min, grid.x_max)
    reports = [
        check_dissipativity(model, samples, seed, domain=domain),
        check_no_free_loop(model, samples, domain=domain),
        check_terminal_consistency(model, grid),
        check_lipschitz(model, samples, seed, domain=domain),
    ]
    logger.info(
        f"Model {model.ref} validated: "
        f"{sum(r.passed for r in reports)}/{len(reports)} checks passed"
    )
    return reports


def _constant_costs(costs: np.ndarray) -> CostFn:
    def switch_cost(x, i, j):
        return np.full_like(x, costs[i, j], dtype=float)

    return switch_cost


def _ou_quadratic() -> SwitchingModel:
    return SwitchingModel(
        m=1,
        controls=[0.0],
        drift=lambda x, i, u: -x,
        diffusion=lambda x, i, u: 1.0,
        running_reward=lambda x, i, u: x ** 2,
        switch_cost=_constant_costs(np.zeros((1, 1))),
        terminal_reward=lambda x, i: 0.0,
        gamma=1.0,
        lipschitz_f=12.0,
        cost_constant_in_x=True,
        ref="ou_quadratic",
    )


def _two_regime_flat() -> SwitchingModel:
    rewards = (0.0, 1.0)
    return SwitchingModel(
        m=2,
        controls=[0.0],
        drift=lambda x, i, u: -x,
        diffusion=lambda x, i, u: 1.0,
        running_reward=lambda x, i, u: rewards[i],
        switch_cost=_constant_costs(np.array([[0.0, 0.1], [0.1, 0.0]])),
        terminal_reward=lambda x, i: 0.0,
        gamma=1.0,
        lipschitz_f=1.0,
        cost_constant_in_x=True,
        ref="two_regime_flat",
    )


def _robust_drift() -> SwitchingModel:
    offsets = (0.0, 1.0)
    return SwitchingModel(
        m=2,
        controls=np.linspace(-1.0, 1.0, 11),
        drift=lambda x, i, u: -x + u / 2,
        diffusion=lambda x, i, u: 1.0,
        running_reward=lambda x, i, u: offsets[i] + x * u,
        switch_cost=_constant_costs(np.array([[0.0, 0.1], [0.1, 0.0]])),
        terminal_reward=lambda x, i: 0.0,
        gamma=1.0,
        lipschitz_f=1.0,
        cost_constant_in_x=True,
        ref="robust_drift",
    )


PRESETS: Dict[str, Callable[[], SwitchingModel]] = {
    "ou_quadratic": _ou_quadratic,
    "two_regime_flat": _two_regime_flat,
    "robust_drift": _robust_drift,
}


def preset(name: str) -> SwitchingModel:
    """
    Build one of the analytic benchmark models.

    Available presets are:

     - `ou_quadratic`: one regime, `b = -x`, `σ = 1`, `f = x²`. The reward is
        not globally Lipschitz, its `lipschitz_f = 12` only holds on `[-6, 6]`
     - `two_regime_flat`: two regimes with rewards 0 and 1, costs 0.1
     - `robust_drift`: two regimes, 11 controls in `[-1, 1]`, `b = -x + u/2`,
        `f = x·u` (+1 in the second regime), costs 0.1

    !!! example
        ```python
        --8<-- "tests/doc/reference/model/test_preset.py"
        ```

    Arguments:
        name: preset name.

    Returns:
        a new model instance.

    Raises:
        ergoswitch.exceptions.ModelException: if the preset is unknown.
    """
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ModelException(
            f"unknown preset {name!r}, available presets are: "
            f"{', '.join(sorted(PRESETS))}"
        )
    return factory()


def parse_cost_matrix(text: str, m: int) -> np.ndarray:
    """
    Parse a cost matrix written as rows separated by `;`.

    Arguments:
        text: matrix such as `"0, 0.1; 0.1, 0"`.
        m: expected number of regimes.

    Returns:
        `(m, m)` array of costs.

    Raises:
        ergoswitch.exceptions.ModelException: if the matrix is malformed.
    """
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
        costs = np.array(rows, dtype=float)
    except ValueError as e:
        raise ModelException(f"invalid cost matrix {text!r}: {e}") from e
    if costs.shape != (m, m):
        raise ModelException(f"cost matrix must be {m}x{m}, got {costs.shape}")
    return costs


def from_table(
    path: str,
    m: int,
    controls: Sequence[float],
    switch_costs: np.ndarray,
    gamma: float,
    lipschitz_f: float,
    ref: Optional[str] = None,
) -> SwitchingModel:
    """
    Build a model from per-node coefficient values.

    The table is a CSV file with header
    `x,b_<i>_<l>,sigma_<i>_<l>,f_<i>_<l>,g_<i>` (1-based regime and control
    indices). Coefficients are linearly interpolated in `x` and flat beyond the
    table.

    Arguments:
        path: path of the coefficient table.
        m: number of regimes.
        controls: control points, matching the `l` indices of the table.
        switch_costs: `(m, m)` constant costs.
        gamma: declared dissipativity constant.
        lipschitz_f: declared Lipschitz constant.
        ref: model code name (defaults to the file name).

    Returns:
        model built on interpolated coefficients.

    Raises:
        ergoswitch.exceptions.ModelException: if the table is unreadable or
            incomplete.
    """
    if not os.path.isfile(path):
        raise ModelException(f"coefficient table not found: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ModelException(f"empty coefficient table: {path}")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as e:
            raise ModelException(f"non numeric value in {path}: {e}") from e
    table = np.array(rows, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] != len(header):
        raise ModelException(f"coefficient table {path} needs at least 2 full rows")
    if not np.all(np.isfinite(table)):
        raise ModelException(f"non-finite value in coefficient table {path}")
    columns = dict(zip(header, table.T))
    if "x" not in columns:
        raise ModelException(f"coefficient table {path} has no x column")
    xs = columns["x"]
    if np.any(np.diff(xs) <= 0):
        raise ModelException(f"x column of {path} must be strictly increasing")

    p = len(controls)
    expected = ["x"]
    expected += [
        f"{name}_{i + 1}_{l + 1}"
        for name in ("b", "sigma", "f")
        for i in range(m)
        for l in range(p)
    ]
    expected += [f"g_{i + 1}" for i in range(m)]
    missing = [name for name in expected if name not in columns]
    if missing:
        raise ModelException(f"coefficient table {path} misses {', '.join(missing)}")

    control_index = {float(u): l for l, u in enumerate(controls)}

    def interpolated(name: str) -> CoefficientFn:
        def coefficient(x, i, u):
            return np.interp(x, xs, columns[f"{name}_{i + 1}_{control_index[u] + 1}"])

        return coefficient

    costs = np.asarray(switch_costs, dtype=float)
    return SwitchingModel(
        m=m,
        controls=controls,
        drift=interpolated("b"),
        diffusion=interpolated("sigma"),
        running_reward=interpolated("f"),
        switch_cost=_constant_costs(costs),
        terminal_reward=lambda x, i: np.interp(x, xs, columns[f"g_{i + 1}"]),
        gamma=gamma,
        lipschitz_f=lipschitz_f,
        cost_constant_in_x=True,
        ref=ref or os.path.splitext(os.path.basename(path))[0],
    )
