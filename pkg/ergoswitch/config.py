import configparser
import logging
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple, Type

from ergoswitch.discretization import Grid, build_grid
from ergoswitch.dual_game import IntensityPolicy, McConfig
from ergoswitch.elliptic import DEFAULT_GAP_TOL, DEFAULT_TOL
from ergoswitch.enums import BoundaryMode
from ergoswitch.ergodic import DEFAULT_BETA_SCHEDULE
from ergoswitch.exceptions import ConfigException, ErgoswitchException
from ergoswitch.model import SwitchingModel, from_table, parse_cost_matrix, preset


logger = logging.getLogger(__name__)

Matrix = Tuple[Tuple[float, ...], ...]


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _matrix(text: str) -> Matrix:
    return tuple(_floats(row) for row in text.split(";") if row.strip())


def _probes(text: str) -> Tuple[Tuple[float, int], ...]:
    probes = []
    for item in text.split(","):
        if not item.strip():
            continue
        x, _, regime = item.partition(":")
        if not regime:
            raise ValueError(f"probe {item.strip()!r} must read <x>:<regime>")
        probes.append((float(x), int(regime)))
    return tuple(probes)


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def converter(text: str) -> Any:
        return None if text.strip().lower() in ("", "none") else convert(text)

    return converter


@dataclass(frozen=True)
class ModelSection:
    """
    Model of the experiment, either a preset or a coefficient table.

    Attributes:
        preset: preset name
        table: path of a coefficient table (relative to the config file)
        m: number of regimes of the table
        controls: control points of the table
        switch_costs: constant costs of the table
        gamma: declared dissipativity constant of the table
        lipschitz_f: declared Lipschitz constant of the table
    """

    preset: Optional[str] = None
    table: Optional[str] = None
    m: Optional[int] = None
    controls: Tuple[float, ...] = (0.0,)
    switch_costs: Optional[str] = None
    gamma: Optional[float] = None
    lipschitz_f: Optional[float] = None

    def build(self) -> SwitchingModel:
        if self.preset is not None:
            return preset(self.preset)
        assert self.table is not None
        assert self.m is not None
        assert self.gamma is not None
        assert self.lipschitz_f is not None
        return from_table(
            self.table,
            m=self.m,
            controls=self.controls,
            switch_costs=parse_cost_matrix(self.switch_costs or "", self.m),
            gamma=self.gamma,
            lipschitz_f=self.lipschitz_f,
        )


@dataclass(frozen=True)
class GridSection:
    x_min: float = -5.0
    x_max: float = 5.0
    n_nodes: int = 201
    boundary_mode: str = BoundaryMode.NEUMANN_ZERO_SLOPE.value

    def build(self) -> Grid:
        return build_grid(self.x_min, self.x_max, self.n_nodes, self.boundary_mode)


@dataclass(frozen=True)
class ParabolicSection:
    t_max: float = 10.0
    snapshot_times: Tuple[float, ...] = ()
    probe_x: float = 0.0
    probe_regime: int = 1


@dataclass(frozen=True)
class EllipticSection:
    betas: Tuple[float, ...] = (0.1,)
    n_schedule: Optional[Tuple[float, ...]] = None
    tol: float = DEFAULT_TOL
    gap_tol: float = DEFAULT_GAP_TOL


@dataclass(frozen=True)
class ErgodicSection:
    """
    Vanishing discount settings.

    Attributes:
        betas: decreasing discount rates
        probe_x: abscissa where the corrector vanishes
        probe_regime: regime (1-based) where the corrector vanishes
        probes: `(x, regime)` pairs where the spread of `β·V^β` is measured
        compare_t_max: horizon of the parabolic comparison, the parabolic
            `t_max` by default
    """

    betas: Tuple[float, ...] = DEFAULT_BETA_SCHEDULE
    probe_x: float = 0.0
    probe_regime: int = 1
    probes: Tuple[Tuple[float, int], ...] = ()
    compare_t_max: Optional[float] = None


@dataclass(frozen=True)
class McSection:
    """
    Monte Carlo settings.

    Attributes:
        x: starting state
        regime: starting regime (1-based)
        control: starting control (1-based)
        beta: discount rate
        xi_family: one row of regime intensities per candidate
        nu_family: one row of control tilts per candidate
        n_bound: regime intensity bound, the largest level by default
        k_bound: control tilt bound, the largest tilt minus 1 by default

    Other attributes are those of [`McConfig`][ergoswitch.dual_game.McConfig].
    """

    n_paths: int = 10_000
    dt: float = 0.01
    horizon: float = 12.0
    seed: int = 0
    theta_mu_weights: Optional[Tuple[float, ...]] = None
    block_size: int = 10_000
    tail_tol: float = 1e-2
    x: float = 0.0
    regime: int = 1
    control: int = 1
    beta: float = 0.1
    xi_family: Matrix = ()
    nu_family: Matrix = ((1.0,),)
    n_bound: Optional[float] = None
    k_bound: Optional[float] = None

    def mc_config(self, grid: Grid, seed: Optional[int] = None) -> McConfig:
        """
        Build the Monte Carlo settings.

        Arguments:
            grid: experiment grid, its domain is used for the reward envelope.
            seed: overrides the configured seed.

        Returns:
            the settings.
        """
        return McConfig(
            n_paths=self.n_paths,
            dt=self.dt,
            horizon=self.horizon,
            seed=self.seed if seed is None else seed,
            theta_mu_weights=self.theta_mu_weights,
            block_size=self.block_size,
            tail_tol=self.tail_tol,
            envelope_domain=(grid.x_min, grid.x_max),
        )

    def xi_policies(self, m: int) -> List[IntensityPolicy]:
        """
        Build the candidate regime intensities, uniform levels by default.
        """
        rows = self.xi_family or ((1.0,) * m,)
        return [
            IntensityPolicy.constant(
                row, n_bound=self.n_bound, k_bound=self.k_bound, ref=f"xi-{a + 1}"
            )
            for a, row in enumerate(rows)
        ]

    def nu_policies(self) -> List[IntensityPolicy]:
        """
        Build the candidate control tilts.
        """
        return [
            IntensityPolicy.constant(
                (1.0,),
                row,
                n_bound=self.n_bound,
                k_bound=self.k_bound,
                ref=f"nu-{b + 1}",
            )
            for b, row in enumerate(self.nu_family)
        ]


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    validation_samples: int = 256
    validation_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Settings of a command line experiment.

    Every section of the config file maps to one attribute, missing sections
    and keys keep their defaults.
    """

    path: str
    model: ModelSection
    grid: GridSection
    parabolic: ParabolicSection
    elliptic: EllipticSection
    ergodic: ErgodicSection
    mc: McSection
    output: OutputSection


SECTIONS: Dict[str, Tuple[Type, Dict[str, Callable[[str], Any]]]] = {
    "model": (
        ModelSection,
        {
            "preset": str.strip,
            "table": str.strip,
            "m": int,
            "controls": _floats,
            "switch_costs": str.strip,
            "gamma": float,
            "lipschitz_f": float,
        },
    ),
    "grid": (
        GridSection,
        {"x_min": float, "x_max": float, "n_nodes": int, "boundary_mode": str.strip},
    ),
    "parabolic": (
        ParabolicSection,
        {
            "t_max": float,
            "snapshot_times": _floats,
            "probe_x": float,
            "probe_regime": int,
        },
    ),
    "elliptic": (
        EllipticSection,
        {
            "betas": _floats,
            "n_schedule": _optional(_floats),
            "tol": float,
            "gap_tol": float,
        },
    ),
    "ergodic": (
        ErgodicSection,
        {
            "betas": _floats,
            "probe_x": float,
            "probe_regime": int,
            "probes": _probes,
            "compare_t_max": _optional(float),
        },
    ),
    "mc": (
        McSection,
        {
            "n_paths": int,
            "dt": float,
            "horizon": float,
            "seed": int,
            "theta_mu_weights": _optional(_floats),
            "block_size": int,
            "tail_tol": float,
            "x": float,
            "regime": int,
            "control": int,
            "beta": float,
            "xi_family": _matrix,
            "nu_family": _matrix,
            "n_bound": _optional(float),
            "k_bound": _optional(float),
        },
    ),
    "output": (
        OutputSection,
        {"directory": str.strip, "validation_samples": int, "validation_seed": int},
    ),
}


def _read(path: str) -> configparser.ConfigParser:
    if not os.path.isfile(path):
        raise ConfigException(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",)
    )
    try:
        with open(path) as f:
            parser.read_file(f)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigException(f"line {e.lineno}: key outside of any section")
    except configparser.DuplicateSectionError as e:
        raise ConfigException(f"line {e.lineno}: duplicate section [{e.section}]")
    except configparser.DuplicateOptionError as e:
        raise ConfigException(f"line {e.lineno}: duplicate key {e.option!r}")
    except configparser.Error as e:
        raise ConfigException(f"cannot parse {path}: {e}")
    return parser


def _section(
    parser: configparser.ConfigParser, name: str, base_directory: str
) -> Any:
    cls, converters = SECTIONS[name]
    if not parser.has_section(name):
        return cls()
    values = {}
    for key, text in parser.items(name):
        if key not in converters:
            raise ConfigException(
                f"[{name}] unknown key {key!r}, allowed keys are: "
                f"{', '.join(converters)}"
            )
        try:
            values[key] = converters[key](text)
        except ValueError as e:
            raise ConfigException(f"[{name}] {key}: invalid value {text!r} ({e})")
    if name == "model" and "table" in values:
        values["table"] = os.path.join(base_directory, values["table"])
    return cls(**values)


def _check_model(section: ModelSection) -> None:
    if (section.preset is None) == (section.table is None):
        raise ConfigException("[model] exactly one of preset or table is required")
    if section.table is None:
        return
    missing = [
        key
        for key in ("m", "switch_costs", "gamma", "lipschitz_f")
        if getattr(section, key) is None
    ]
    if missing:
        raise ConfigException(f"[model] table models require {', '.join(missing)}")
    if not os.path.isfile(section.table):
        raise ConfigException(f"[model] table: file not found {section.table}")


def _check_ranges(config: ExperimentConfig, model: SwitchingModel) -> None:
    checks = [
        ("parabolic", "t_max", config.parabolic.t_max > 0),
        ("parabolic", "probe_regime", 1 <= config.parabolic.probe_regime <= model.m),
        ("elliptic", "betas", all(b > 0 for b in config.elliptic.betas)),
        ("elliptic", "tol", config.elliptic.tol > 0),
        ("ergodic", "probe_regime", 1 <= config.ergodic.probe_regime <= model.m),
        (
            "ergodic",
            "probes",
            all(1 <= i <= model.m for _, i in config.ergodic.probes),
        ),
        ("mc", "regime", 1 <= config.mc.regime <= model.m),
        ("mc", "control", 1 <= config.mc.control <= model.p),
        ("mc", "beta", config.mc.beta > 0),
        ("mc", "xi_family", all(len(row) == model.m for row in config.mc.xi_family)),
        (
            "mc",
            "nu_family",
            bool(config.mc.nu_family)
            and all(len(row) in (1, model.p) for row in config.mc.nu_family),
        ),
        ("output", "validation_samples", config.output.validation_samples > 0),
    ]
    for section, key, valid in checks:
        if not valid:
            raise ConfigException(f"[{section}] {key}: value out of range")
    if not config.elliptic.betas:
        raise ConfigException("[elliptic] betas: at least one discount rate required")
    betas = config.ergodic.betas
    if not betas or any(b >= a for a, b in zip(betas, betas[1:])):
        raise ConfigException("[ergodic] betas: must be strictly decreasing")


def load_config(path: str) -> ExperimentConfig:
    """
    Load an experiment config file.

    The file is made of `[section]` headers followed by `key = value` lines.
    Lists are comma separated and matrices have their rows separated by `;`.
    See the config page of the documentation for every key.

    !!! example
        ```python
        --8<-- "tests/doc/reference/config/test_load_config.py"
        ```

    Arguments:
        path: config file path, relative paths found in the file are resolved
            from its directory.

    Returns:
        the experiment settings.

    Raises:
        ergoswitch.exceptions.ConfigException: if the file is missing or
            malformed, or if a value is out of its range.
    """
    parser = _read(path)
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigException(
            f"unknown section [{unknown[0]}], allowed sections are: "
            f"{', '.join(SECTIONS)}"
        )
    base_directory = os.path.dirname(os.path.abspath(path))
    sections = {
        name: _section(parser, name, base_directory) for name in SECTIONS
    }
    config = ExperimentConfig(path=path, **sections)
    _check_model(config.model)

    # build once so range errors surface at load time
    try:
        model = config.model.build()
        grid = config.grid.build()
        config.mc.mc_config(grid)
        config.mc.xi_policies(model.m)
        config.mc.nu_policies()
    except ErgoswitchException as e:
        raise ConfigException(str(e)) from e
    _check_ranges(config, model)
    logger.info(f"Config loaded from {path}: model {model.ref} on {grid}")
    return config

