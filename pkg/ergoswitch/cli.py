import logging
from typing import Dict, List, Optional, Tuple

import click

from ergoswitch.config import ExperimentConfig, load_config
from ergoswitch.discretization import Grid
from ergoswitch.dual_game import sup_inf_search
from ergoswitch.elliptic import solve_elliptic
from ergoswitch.enums import Stage
from ergoswitch.ergodic import compare_parabolic, extract_ergodic, lambda_probe_spread
from ergoswitch.exceptions import ConfigException, ErgoswitchException
from ergoswitch.model import SwitchingModel, ValidationReport, validate_model
from ergoswitch.parabolic import ParabolicRun, solve_parabolic
from ergoswitch.reporting.csv import ReportingCSV


logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_CONFIG = 2

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class Experiment:
    """
    Run the stages of an experiment and collect what goes in the summary.

    Arguments:
        config: experiment settings.
        out: output directory, the configured one by default.
        seed: Monte Carlo seed, the configured one by default.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        out: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> None:
        self.config = config
        self.seed = seed
        self.model: SwitchingModel = config.model.build()
        self.grid: Grid = config.grid.build()
        self.reporting = ReportingCSV(out or config.output.directory)
        self.routes: Dict[str, Tuple[float, str]] = {}
        self.details: Dict[str, str] = {}
        self.run: Optional[ParabolicRun] = None

    def validate(self) -> List[ValidationReport]:
        return validate_model(
            self.model,
            self.grid,
            samples=self.config.output.validation_samples,
            seed=self.config.output.validation_seed,
        )

    def parabolic(self) -> None:
        section = self.config.parabolic
        self.run = solve_parabolic(
            self.model,
            self.grid,
            section.t_max,
            section.snapshot_times,
            x0=section.probe_x,
            i0=section.probe_regime - 1,
        )
        self.reporting.parabolic(self.run, self.grid)
        t, average = self.run.averages[-1]
        self.routes["parabolic"] = (average, f"V(T)/T at T={t:g}")

    def elliptic(self) -> None:
        section = self.config.elliptic
        solves = [
            solve_elliptic(
                self.model,
                self.grid,
                beta,
                section.n_schedule,
                tol=section.tol,
                gap_tol=section.gap_tol,
            )
            for beta in section.betas
        ]
        self.reporting.elliptic(solves, self.grid)
        for solve in solves:
            self.details[f"elliptic beta={solve.beta:g}"] = (
                f"converged={solve.converged}, "
                f"obstacle residual {solve.obstacle_residual:.3e}, "
                f"penalty gap {solve.penalty_gap:.3e}"
            )

    def ergodic(self) -> None:
        section = self.config.ergodic
        i0 = section.probe_regime - 1
        estimate = extract_ergodic(
            self.model,
            self.grid,
            section.betas,
            x0=section.probe_x,
            i0=i0,
            n_schedule=self.config.elliptic.n_schedule,
            tol=self.config.elliptic.tol,
            gap_tol=self.config.elliptic.gap_tol,
        )
        probes = [(x, i - 1) for x, i in section.probes]
        spreads = [
            lambda_probe_spread(self.model, self.grid, beta, probes, solve=solve)
            if len(probes) > 1
            else None
            for beta, solve in zip(estimate.beta_schedule, estimate.solves)
        ]
        self.reporting.ergodic(estimate, spreads, self.grid)
        self.routes["beta_V_beta"] = (
            estimate.lambda_,
            f"beta={estimate.beta_schedule[-1]:g}",
        )
        self.routes["richardson"] = (
            estimate.richardson_lambda,
            f"ergodic residual {estimate.residual:.3e}",
        )

        t_max = section.compare_t_max or self.config.parabolic.t_max
        run = self.run
        if run is None or abs(run.averages[-1][0] - t_max) > 1e-12 * t_max:
            run = solve_parabolic(
                self.model, self.grid, t_max, [t_max], x0=section.probe_x, i0=i0
            )
        gap = compare_parabolic(
            self.model,
            self.grid,
            estimate.richardson_lambda,
            t_max,
            x0=section.probe_x,
            i0=i0,
            run=run,
        )
        self.routes.setdefault("parabolic", (run.averages[-1][1], f"T={t_max:g}"))
        self.details["parabolic gap to richardson"] = f"{gap:.6g}"

    def dual_game(self) -> None:
        section = self.config.mc
        cfg = section.mc_config(self.grid, seed=self.seed)
        xi_family = section.xi_policies(self.model.m)
        nu_family = section.nu_policies()
        saddle = sup_inf_search(
            self.model,
            section.x,
            section.regime - 1,
            section.beta,
            xi_family,
            nu_family,
            cfg,
            u_idx=section.control - 1,
        )
        self.reporting.dual_game(saddle, xi_family, nu_family)
        self.details["dual game value"] = (
            f"{saddle.estimate.mean:.6g} +/- {saddle.estimate.stderr:.2e} "
            f"(seed {cfg.seed}, beta={section.beta:g}, "
            f"xi={xi_family[saddle.xi_index].ref}, "
            f"nu={nu_family[saddle.nu_index].ref})"
        )

    def summary(self, stages: List[Stage]) -> str:
        header = {
            "config": self.config.path,
            "model": self.model.ref,
            "grid": repr(self.grid),
            "stages": ", ".join(s.value for s in stages),
        }
        return self.reporting.summary(header, self.routes, self.details)


STAGE_RUNNERS = {
    Stage.PARABOLIC: Experiment.parabolic,
    Stage.ELLIPTIC: Experiment.elliptic,
    Stage.ERGODIC: Experiment.ergodic,
    Stage.DUALGAME: Experiment.dual_game,
}


def _load(ctx: click.Context, path: str) -> ExperimentConfig:
    try:
        return load_config(path)
    except ConfigException as e:
        click.echo(str(e), err=True)
        ctx.exit(EXIT_CONFIG)


@click.group()
@click.option(
    "-v", "--verbose", count=True, help="Log INFO messages, DEBUG when repeated."
)
def cli(verbose: int) -> None:
    """Robust switching control experiments."""
    logging.basicConfig(
        level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("config_path", metavar="CFG")
@click.pass_context
def validate(ctx: click.Context, config_path: str) -> None:
    """Audit the model assumptions of an experiment."""
    config = _load(ctx, config_path)
    try:
        reports = Experiment(config).validate()
    except ErgoswitchException as e:
        click.echo(f"validation failed: {e}", err=True)
        ctx.exit(EXIT_FAILURE)
    for report in reports:
        click.echo(str(report))
    if not all(r.passed for r in reports):
        ctx.exit(EXIT_FAILURE)


@cli.command()
@click.argument("config_path", metavar="CFG")
@click.option(
    "--stage",
    type=click.Choice([s.value for s in Stage]),
    default=Stage.ALL.value,
    show_default=True,
    help="Stage to run.",
)
@click.option("--seed", type=int, default=None, help="Override the Monte Carlo seed.")
@click.option("--out", type=click.Path(), default=None, help="Output directory.")
@click.option("--force", is_flag=True, help="Run even if the model validation fails.")
@click.pass_context
def run(
    ctx: click.Context,
    config_path: str,
    stage: str,
    seed: Optional[int],
    out: Optional[str],
    force: bool,
) -> None:
    """Run the stages of an experiment and write CSV files and a summary."""
    config = _load(ctx, config_path)
    if seed is not None and seed < 0:
        click.echo(f"seed must be nonnegative: {seed}", err=True)
        ctx.exit(EXIT_CONFIG)
    experiment = Experiment(config, out=out, seed=seed)

    try:
        reports = experiment.validate()
    except ErgoswitchException as e:
        click.echo(f"validation failed: {e}", err=True)
        ctx.exit(EXIT_FAILURE)
    failed = [r for r in reports if not r.passed]
    for report in failed:
        click.echo(str(report), err=True)
    if failed and not force:
        click.echo("validation failed, use --force to run anyway", err=True)
        ctx.exit(EXIT_FAILURE)
    if failed:
        logger.warning(f"Running {config_path} despite {len(failed)} failed checks")

    stages = Stage(stage).expand()
    for current in stages:
        logger.info(f"Stage {current.value} started")
        try:
            STAGE_RUNNERS[current](experiment)
        except ErgoswitchException as e:
            click.echo(f"stage {current.value} failed: {e}", err=True)
            ctx.exit(EXIT_FAILURE)
        logger.info(f"Stage {current.value} done")

    path = experiment.summary(stages)
    click.echo(f"summary written to {path}")
