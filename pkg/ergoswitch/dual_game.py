import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ergoswitch.exceptions import MonteCarloException
from ergoswitch.mixins import RefMixin
from ergoswitch.model import SwitchingModel, ValidationReport


logger = logging.getLogger(__name__)

MOMENT_LADDER = (1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True)
class McConfig:
    """
    Settings of a Monte Carlo estimation.

    Attributes:
        n_paths: number of simulated paths
        dt: time step of the Euler–Maruyama scheme
        horizon: truncation time of the payoff integral
        seed: master seed, every block of paths draws from its own stream
        theta_mu_weights: weights of the control jump measure over the control
            set, uniform when `None`
        block_size: number of paths simulated together. Block `b` draws from
            the stream spawned with key `b`, so estimates change with the
            block size (only the seed and the block size fix the numbers)
        tail_tol: largest accepted bound on the truncated payoff tail
        envelope_domain: interval where the envelope of `|f|` is estimated
    """

    n_paths: int = 10_000
    dt: float = 0.01
    horizon: float = 12.0
    seed: int = 0
    theta_mu_weights: Optional[Tuple[float, ...]] = None
    block_size: int = 10_000
    tail_tol: float = 1e-2
    envelope_domain: Tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self) -> None:
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise MonteCarloException(f"n_paths must be a positive int: {self.n_paths}")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise MonteCarloException(f"dt must be positive: {self.dt}")
        if not self.horizon >= self.dt or not math.isfinite(self.horizon):
            raise MonteCarloException(
                f"horizon ({self.horizon}) must be finite and at least dt ({self.dt})"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise MonteCarloException(
                f"seed must be a 64-bit unsigned int: {self.seed}"
            )
        if not isinstance(self.block_size, int) or self.block_size < 1:
            raise MonteCarloException(
                f"block_size must be a positive int: {self.block_size}"
            )
        if not self.tail_tol > 0:
            raise MonteCarloException(f"tail_tol must be positive: {self.tail_tol}")
        low, high = self.envelope_domain
        if not low < high:
            raise MonteCarloException(
                f"invalid envelope domain: {self.envelope_domain}"
            )
        if self.theta_mu_weights is not None:
            weights = np.asarray(self.theta_mu_weights, dtype=float)
            if weights.ndim != 1 or weights.size == 0 or np.any(weights < 0):
                raise MonteCarloException(
                    f"weights must be nonnegative: {self.theta_mu_weights}"
                )
            if abs(weights.sum() - 1.0) > 1e-9:
                raise MonteCarloException(
                    f"weights must sum to 1: {self.theta_mu_weights}"
                )
            object.__setattr__(self, "theta_mu_weights", tuple(weights.tolist()))

    @property
    def n_steps(self) -> int:
        """
        Return the number of time steps up to the horizon.

        Returns:
            smallest number of steps of length `dt` covering the horizon.
        """
        return max(int(math.ceil(self.horizon / self.dt - 1e-9)), 1)

    def weights(self, p: int) -> np.ndarray:
        """
        Return the control jump weights for a control set of size `p`.

        Raises:
            ergoswitch.exceptions.MonteCarloException: on a size mismatch.
        """
        if self.theta_mu_weights is None:
            return np.full(p, 1.0 / p)
        if len(self.theta_mu_weights) != p:
            raise MonteCarloException(
                f"{len(self.theta_mu_weights)} weights for {p} control points"
            )
        return np.asarray(self.theta_mu_weights)

    def replace(self, **changes: Any) -> "McConfig":
        """Return a copy of the current config with some fields changed."""
        return dataclasses.replace(self, **changes)


XiFn = Callable[[np.ndarray, int], Any]
NuFn = Callable[[np.ndarray, int], Any]


class IntensityPolicy(RefMixin):
    """
    Feedback intensities of the randomized regime and control jumps.

    `xi(x, i)` gives, for paths in regime `i`, the jump intensity toward every
    regime `j` (self jumps included), valued in `(0, n_bound]`. `nu(x, l)`
    gives the tilt of the jump intensity toward control `l`, valued in
    `[1, k_bound + 1]`.

    Attributes:
        n_bound (float): upper bound of regime intensities
        k_bound (float): control tilts are bounded by `k_bound + 1`

        ref (str): reference of this instance
            (see `ergoswitch.mixins.ref.RefMixin`)
    """

    ref_prefix = "policy-"

    def __init__(
        self,
        xi: XiFn,
        nu: NuFn,
        n_bound: float,
        k_bound: float,
        ref: Optional[str] = None,
    ) -> None:
        RefMixin.__init__(self, ref)
        if not callable(xi) or not callable(nu):
            raise MonteCarloException("xi and nu must be callable")
        if not n_bound > 0:
            raise MonteCarloException(f"n_bound must be positive: {n_bound}")
        if not k_bound >= 0:
            raise MonteCarloException(f"k_bound must be nonnegative: {k_bound}")
        self._xi = xi
        self._nu = nu
        self.n_bound = float(n_bound)
        self.k_bound = float(k_bound)

    @classmethod
    def constant(
        cls,
        xi_levels: Sequence[float],
        nu_levels: Any = 1.0,
        n_bound: Optional[float] = None,
        k_bound: Optional[float] = None,
        ref: Optional[str] = None,
    ) -> "IntensityPolicy":
        """
        Build a policy whose intensities do not depend on the state.

        !!! example
            ```python
            --8<-- "tests/doc/reference/dual_game/test_constant_policy.py"
            ```

        Arguments:
            xi_levels: intensity toward each target regime.
            nu_levels: tilt of each control point (or one tilt for all).
            n_bound: regime intensity bound, defaults to the largest level.
            k_bound: control tilt bound, defaults to the largest tilt minus 1.
            ref: policy code name.

        Returns:
            the policy.
        """
        xi_levels = np.asarray(xi_levels, dtype=float)
        nu_array = np.atleast_1d(np.asarray(nu_levels, dtype=float))

        def xi(x, i):
            return np.broadcast_to(xi_levels, (x.size, xi_levels.size))

        def nu(x, l):
            return np.full(x.size, nu_array[l if nu_array.size > 1 else 0])

        return cls(
            xi=xi,
            nu=nu,
            n_bound=float(xi_levels.max()) if n_bound is None else n_bound,
            k_bound=max(float(nu_array.max()) - 1.0, 0.0)
            if k_bound is None
            else k_bound,
            ref=ref,
        )

    def combine(self, other: "IntensityPolicy") -> "IntensityPolicy":
        """
        Build the policy using the current regime intensities and the control
        tilts of `other`.
        """
        return IntensityPolicy(
            xi=self._xi,
            nu=other._nu,
            n_bound=self.n_bound,
            k_bound=other.k_bound,
            ref=f"{self.ref}+{other.ref}",
        )

    def regime_intensities(self, x: np.ndarray, i: int, m: int) -> np.ndarray:
        """
        Evaluate `xi` for paths in regime `i`.

        Returns:
            `(len(x), m)` array of intensities.

        Raises:
            ergoswitch.exceptions.MonteCarloException: if an intensity is out of
                `(0, n_bound]`.
        """
        try:
            values = np.broadcast_to(
                np.asarray(self._xi(x, i), dtype=float), (x.size, m)
            )
        except ValueError as e:
            raise MonteCarloException(f"xi of {self.ref} has a wrong shape: {e}")
        if not np.all((values > 0) & (values <= self.n_bound * (1 + 1e-12))):
            raise MonteCarloException(
                f"xi of {self.ref} leaves (0, {self.n_bound}] in regime {i + 1}"
            )
        return values

    def control_intensities(self, x: np.ndarray, l: int) -> np.ndarray:
        """
        Evaluate `nu` toward control `l`.

        Returns:
            array of tilts with the shape of `x`.

        Raises:
            ergoswitch.exceptions.MonteCarloException: if a tilt is out of
                `[1, k_bound + 1]`.
        """
        try:
            values = np.broadcast_to(np.asarray(self._nu(x, l), dtype=float), x.shape)
        except ValueError as e:
            raise MonteCarloException(f"nu of {self.ref} has a wrong shape: {e}")
        upper = (self.k_bound + 1) * (1 + 1e-12)
        if not np.all((values >= 1) & (values <= upper)):
            raise MonteCarloException(
                f"nu of {self.ref} leaves [1, {self.k_bound + 1}] for control {l}"
            )
        return values

    def __repr__(self) -> str:
        return (
            f"IntensityPolicy(ref={self.ref!r}, n_bound={self.n_bound}, "
            f"k_bound={self.k_bound})"
        )


@dataclass(frozen=True)
class McEstimate:
    """
    Monte Carlo estimate of an expectation.

    Attributes:
        mean: sample mean
        stderr: standard error of the mean
        n_paths: number of paths
        seed: master seed
    """

    mean: float
    stderr: float
    n_paths: int
    seed: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, seed: int) -> "McEstimate":
        n = samples.size
        stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(np.mean(samples)), stderr=stderr, n_paths=n, seed=seed)


class SaddlePoint(NamedTuple):
    xi_index: int
    nu_index: int
    estimate: McEstimate
    table: List[List[McEstimate]]


class _Draws(NamedTuple):
    normal: np.ndarray
    regime: np.ndarray
    regime_tie: np.ndarray
    control: np.ndarray
    control_tie: np.ndarray


def _draw(rng: np.random.Generator, size: int, m: int, p: int) -> _Draws:
    # fixed consumption per step whatever fires
    return _Draws(
        normal=rng.standard_normal(size),
        regime=rng.random((size, m)),
        regime_tie=rng.random(size),
        control=rng.random((size, p)),
        control_tie=rng.random(size),
    )


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def _pick(fire: np.ndarray, tie: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Choose uniformly one fired column per row."""
    count = fire.sum(axis=1)
    rank = np.minimum((tie * count).astype(int), np.maximum(count - 1, 0))
    target = np.argmax(np.cumsum(fire, axis=1) > rank[:, None], axis=1)
    return count > 0, target


class _Paths:
    """Mutable state of a block of paths `(X, I, Γ)` and their payoffs."""

    def __init__(self, size: int, x: float, i: int, u_idx: int) -> None:
        self.X = np.full(size, float(x))
        self.I = np.full(size, i, dtype=np.int64)
        self.G = np.full(size, u_idx, dtype=np.int64)
        self.payoff = np.zeros(size)

    def step(
        self,
        model: SwitchingModel,
        policy: IntensityPolicy,
        weights: np.ndarray,
        beta: float,
        t: float,
        dt: float,
        draws: _Draws,
        index: int,
    ) -> None:
        X, I, G = self.X, self.I, self.G
        drift, vol, reward = np.empty_like(X), np.empty_like(X), np.empty_like(X)
        intensities = np.empty((X.size, model.m))
        for i in range(model.m):
            in_regime = I == i
            if not in_regime.any():
                continue
            intensities[in_regime] = policy.regime_intensities(X[in_regime], i, model.m)
            for l in range(model.p):
                mask = in_regime & (G == l)
                if mask.any():
                    drift[mask] = model.drift(X[mask], i, l)
                    vol[mask] = model.diffusion(X[mask], i, l)
                    reward[mask] = model.running_reward(X[mask], i, l)

        self.payoff += math.exp(-beta * t) * (-math.expm1(-beta * dt)) / beta * reward
        X_next = X + drift * dt + vol * math.sqrt(dt) * draws.normal
        if not np.all(np.isfinite(X_next)):
            raise MonteCarloException(f"non-finite state at step {index}")

        jumped, target = _pick(
            draws.regime < -np.expm1(-intensities * dt), draws.regime_tie
        )
        if jumped.any():
            cost = np.zeros_like(X)
            for i in range(model.m):
                for j in range(model.m):
                    mask = jumped & (I == i) & (target == j)
                    if mask.any():
                        cost[mask] = model.switch_cost(X_next[mask], i, j)
            self.payoff -= math.exp(-beta * (t + dt)) * cost
            self.I = np.where(jumped, target, I)

        rates = np.column_stack(
            [policy.control_intensities(X, l) * weights[l] for l in range(model.p)]
        )
        fired = draws.control < -np.expm1(-rates * dt)
        moved, control = _pick(fired, draws.control_tie)
        self.G = np.where(moved, control, G)
        self.X = X_next


def _check_start(model: SwitchingModel, x: float, i: int, u_idx: int, beta: float):
    if not math.isfinite(x):
        raise MonteCarloException(f"starting state must be finite: {x}")
    if not 0 <= i < model.m:
        raise MonteCarloException(f"regime index out of range: {i}")
    if not 0 <= u_idx < model.p:
        raise MonteCarloException(f"control index out of range: {u_idx}")
    if not beta > 0:
        raise MonteCarloException(f"discount rate must be positive: {beta}")


def _run_block(
    model: SwitchingModel,
    x: float,
    i: int,
    u_idx: int,
    policy: IntensityPolicy,
    beta: float,
    cfg: McConfig,
    size: int,
    stream: int,
    n_steps: Optional[int] = None,
    observe: Sequence[int] = (),
) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    rng = _stream(cfg.seed, stream)
    weights = cfg.weights(model.p)
    paths = _Paths(size, x, i, u_idx)
    observed: Dict[int, np.ndarray] = {}
    for k in range(cfg.n_steps if n_steps is None else n_steps):
        draws = _draw(rng, size, model.m, model.p)
        paths.step(model, policy, weights, beta, k * cfg.dt, cfg.dt, draws, k)
        if k + 1 in observe:
            observed[k + 1] = paths.X.copy()
    return paths.payoff, observed


def _blocks(cfg: McConfig) -> List[Tuple[int, int]]:
    return [
        (b, min(cfg.block_size, cfg.n_paths - start))
        for b, start in enumerate(range(0, cfg.n_paths, cfg.block_size))
    ]


def tail_bound(model: SwitchingModel, beta: float, cfg: McConfig) -> float:
    """
    Bound the payoff lost by truncating the time integral at the horizon.

    Returns:
        `e^{-β·horizon}·sup|f| / β`, `sup|f|` estimated on the envelope domain.
    """
    envelope = model.reward_envelope(*cfg.envelope_domain)
    return math.exp(-beta * cfg.n_steps * cfg.dt) * envelope / beta


def _check_tail(model: SwitchingModel, beta: float, cfg: McConfig) -> None:
    bound = tail_bound(model, beta, cfg)
    if bound > cfg.tail_tol:
        raise MonteCarloException(
            f"horizon {cfg.horizon} too short for beta={beta}: tail bound "
            f"{bound:.3e} exceeds {cfg.tail_tol}"
        )
    if bound > 0.5 * cfg.tail_tol:
        logger.warning(
            f"Tail bound {bound:.3e} is close to its tolerance {cfg.tail_tol}"
        )


def simulate_path(
    model: SwitchingModel,
    x: float,
    i: int,
    u_idx: int,
    policy: IntensityPolicy,
    beta: float,
    cfg: McConfig,
    path_seed: int,
) -> float:
    """
    Simulate one path of the randomized system and return its discounted payoff.

    The state follows an Euler–Maruyama scheme; at the end of each step a
    regime jump toward `j` fires with probability `1 - exp(-ξ_j·dt)`
    (one jump at most, uniformly tie-broken, the switching cost being charged)
    and a control jump toward `u_l` with rate `ν_l·θ_l`.

    Arguments:
        model: switching model.
        x: starting state.
        i: starting regime index.
        u_idx: starting control index.
        policy: jump intensities.
        beta: discount rate.
        cfg: Monte Carlo settings.
        path_seed: stream counter, path `k` of an estimate with `block_size=1`
            uses stream `k`.

    Returns:
        discounted payoff up to the horizon.

    Raises:
        ergoswitch.exceptions.MonteCarloException: on invalid arguments or a
            non-finite state.
    """
    _check_start(model, x, i, u_idx, beta)
    payoff, _ = _run_block(model, x, i, u_idx, policy, beta, cfg, 1, path_seed)
    return float(payoff[0])


def estimate_payoff(
    model: SwitchingModel,
    x: float,
    i: int,
    u_idx: int,
    policy: IntensityPolicy,
    beta: float,
    cfg: McConfig,
) -> McEstimate:
    """
    Estimate the expected discounted payoff of the randomized system.

    Paths are simulated by blocks, block `b` drawing from the stream
    `SeedSequence(cfg.seed, spawn_key=(b,))`.

    !!! example
        ```python
        --8<-- "tests/doc/reference/dual_game/test_estimate_payoff.py"
        ```

    Arguments:
        model: switching model.
        x: starting state.
        i: starting regime index.
        u_idx: starting control index.
        policy: jump intensities.
        beta: discount rate.
        cfg: Monte Carlo settings.

    Returns:
        the estimate.

    Raises:
        ergoswitch.exceptions.MonteCarloException: on invalid arguments, if the
            horizon is too short or on a non-finite state.
    """
    _check_start(model, x, i, u_idx, beta)
    if cfg.n_paths < 2:
        raise MonteCarloException(f"at least two paths are required: {cfg.n_paths}")
    _check_tail(model, beta, cfg)
    payoffs = np.concatenate(
        [
            _run_block(model, x, i, u_idx, policy, beta, cfg, size, b)[0]
            for b, size in _blocks(cfg)
        ]
    )
    estimate = McEstimate.from_samples(payoffs, cfg.seed)
    logger.info(
        f"Payoff of {model.ref} from ({x}, {i + 1}) under {policy.ref}: "
        f"{estimate.mean:.6f} +/- {estimate.stderr:.2e}"
    )
    return estimate


def sup_inf_search(
    model: SwitchingModel,
    x: float,
    i: int,
    beta: float,
    xi_family: Sequence[IntensityPolicy],
    nu_family: Sequence[IntensityPolicy],
    cfg: McConfig,
    u_idx: int = 0,
) -> SaddlePoint:
    """
    Search the sup over regime intensities of the inf over control tilts.

    Every pair is estimated with the same streams, the regime intensities of
    the pair come from `xi_family` and its control tilts from `nu_family`.
    Restricted families make the result an approximation of the game value,
    not a bound.

    Arguments:
        model: switching model.
        x: starting state.
        i: starting regime index.
        beta: discount rate.
        xi_family: candidate regime intensities.
        nu_family: candidate control tilts.
        cfg: Monte Carlo settings.
        u_idx: starting control index.

    Returns:
        best regime intensity index, worst control tilt index against it, the
            saddle estimate and the table of every pair.
    """
    if not xi_family or not nu_family:
        raise MonteCarloException("intensity families cannot be empty")
    table = [
        [
            estimate_payoff(model, x, i, u_idx, xi.combine(nu), beta, cfg)
            for nu in nu_family
        ]
        for xi in xi_family
    ]
    worst = [int(np.argmin([e.mean for e in row])) for row in table]
    best = int(np.argmax([row[b].mean for row, b in zip(table, worst)]))
    saddle = SaddlePoint(best, worst[best], table[best][worst[best]], table)
    logger.info(
        f"Saddle of {model.ref}: xi={xi_family[best].ref}, "
        f"nu={nu_family[worst[best]].ref}, value {saddle.estimate.mean:.6f}"
    )
    return saddle


def check_moment_bound(
    model: SwitchingModel,
    x: float,
    i: int,
    u_idx: int,
    policy: IntensityPolicy,
    cfg: McConfig,
    ladder: Sequence[float] = MOMENT_LADDER,
) -> ValidationReport:
    """
    Check the second moment of the state does not explode.

    Estimates `E|X_t|²` along the time ladder; passes iff every estimate is at
    most `C·(1 + |x|²)`, `C` being 4 times the first estimate over `1 + |x|²`.

    Arguments:
        model: switching model.
        x: starting state.
        i: starting regime index.
        u_idx: starting control index.
        policy: jump intensities.
        cfg: Monte Carlo settings (the horizon is replaced by the ladder end).
        ladder: increasing observation times.

    Returns:
        validation report, its witness holds the estimates of the whole
            ladder under `moments`.
    """
    _check_start(model, x, i, u_idx, 1.0)
    steps = [max(int(round(t / cfg.dt)), 1) for t in ladder]
    sums = dict.fromkeys(steps, 0.0)
    for b, size in _blocks(cfg):
        _, observed = _run_block(
            model, x, i, u_idx, policy, 1.0, cfg, size, b, max(steps), steps
        )
        for k, X in observed.items():
            sums[k] += float(np.sum(X ** 2))
    moments = [sums[k] / cfg.n_paths for k in steps]
    bound = 4.0 * moments[0]
    excess = [mo - bound for mo in moments]
    worst = int(np.argmax(excess))
    report = ValidationReport.from_violation(
        "moment_bound",
        excess[worst],
        0.0,
        {
            "t": ladder[worst],
            "moment": moments[worst],
            "bound": bound,
            "moments": tuple(moments),
        },
    )
    logger.debug(f"{report} (moments {moments})")
    return report


def discretization_drift(
    model: SwitchingModel,
    x: float,
    i: int,
    u_idx: int,
    policy: IntensityPolicy,
    beta: float,
    cfg: McConfig,
) -> McEstimate:
    """
    Estimate the payoff change when the time step is halved.

    Every path is simulated at `dt/2` and at `dt` with the same Brownian
    increments (pairs of fine increments summed) and the same jump uniforms
    (those of the first fine substep).

    Arguments:
        model: switching model.
        x: starting state.
        i: starting regime index.
        u_idx: starting control index.
        policy: jump intensities.
        beta: discount rate.
        cfg: Monte Carlo settings of the coarse scheme.

    Returns:
        estimate of the mean fine minus coarse payoff.
    """
    _check_start(model, x, i, u_idx, beta)
    _check_tail(model, beta, cfg)
    weights = cfg.weights(model.p)
    half = 0.5 * cfg.dt
    differences = []
    for b, size in _blocks(cfg):
        rng = _stream(cfg.seed, b)
        fine, coarse = _Paths(size, x, i, u_idx), _Paths(size, x, i, u_idx)
        for k in range(cfg.n_steps):
            t = k * cfg.dt
            first = _draw(rng, size, model.m, model.p)
            second = _draw(rng, size, model.m, model.p)
            fine.step(model, policy, weights, beta, t, half, first, 2 * k)
            fine.step(model, policy, weights, beta, t + half, half, second, 2 * k + 1)
            joint = first._replace(normal=(first.normal + second.normal) / math.sqrt(2))
            coarse.step(model, policy, weights, beta, t, cfg.dt, joint, k)
        differences.append(fine.payoff - coarse.payoff)
    return McEstimate.from_samples(np.concatenate(differences), cfg.seed)
