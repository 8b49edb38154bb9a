import csv
import itertools
import logging
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import arrow  # type: ignore

from ergoswitch.discretization import Grid
from ergoswitch.dual_game import IntensityPolicy, SaddlePoint
from ergoswitch.elliptic import EllipticSolve
from ergoswitch.ergodic import ErgodicEstimate
from ergoswitch.parabolic import ParabolicRun


logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Render floats with 17 significant digits, anything else with `str`."""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class CSVWriter:
    @staticmethod
    def open_file(path: str, filename: str):
        if not os.path.exists(path):
            os.makedirs(path)
        return open(os.path.join(path, filename), "w", newline="")

    @staticmethod
    def dict_to_csv(
        path: str, filename: str, dict_list: Sequence[Mapping], headers: List[str]
    ) -> str:
        with CSVWriter.open_file(path, filename) as f:
            writer = csv.DictWriter(f, fieldnames=headers, lineterminator="\n")
            writer.writeheader()
            for d in dict_list:
                writer.writerow({k: format_value(v) for k, v in d.items()})
        return os.path.join(path, filename)


class ReportingCSV:
    def __init__(self, target_folder: str = "results") -> None:
        """
        Create a reporting instance.

        Files are overwritten, so running the same experiment twice leaves
        identical files.

        Arguments:
            target_folder: target folder, created when missing.
        """
        self.target_folder = target_folder

    def field(self, filename: str, values: Any, grid: Grid) -> str:
        path = os.path.join(self.target_folder, filename)
        if not os.path.exists(self.target_folder):
            os.makedirs(self.target_folder)
        values.to_csv(path, grid)
        return path

    def parabolic(self, run: ParabolicRun, grid: Grid) -> List[str]:
        """
        Report a parabolic run.

        Creates `parabolic.csv` (`T,lambda_T,probe_value`) and one field file
        per snapshot.

        Arguments:
            run: parabolic run.
            grid: grid of the run.

        Returns:
            paths of the created files.
        """
        logger.info("Report parabolic run as CSV")
        rows = [
            {"T": t, "lambda_T": average, "probe_value": value}
            for (t, average), (_, value) in zip(run.averages, run.probe_values())
        ]
        paths = [
            CSVWriter.dict_to_csv(
                self.target_folder,
                "parabolic.csv",
                rows,
                ["T", "lambda_T", "probe_value"],
            )
        ]
        for t, snapshot in run.snapshots:
            paths.append(self.field(f"parabolic_T_{t:.6g}.csv", snapshot, grid))
        return paths

    def elliptic(self, solves: Sequence[EllipticSolve], grid: Grid) -> List[str]:
        """
        Report discounted solves.

        Creates `elliptic.csv` with one row per `(β, n)` level
        (`beta,n,residual,iterations,sup_gap`, the gap to the previous level
        being `nan` on the first level) and one field file per `β`.
        """
        logger.info("Report discounted solves as CSV")
        rows = []
        for solve in solves:
            gaps = [math.nan] + list(solve.cauchy_gaps)
            for level, gap in zip(solve.levels, gaps):
                rows.append(
                    {
                        "beta": solve.beta,
                        "n": level.n_penalty,
                        "residual": level.residual,
                        "iterations": level.iterations,
                        "sup_gap": gap,
                    }
                )
        paths = [
            CSVWriter.dict_to_csv(
                self.target_folder,
                "elliptic.csv",
                rows,
                ["beta", "n", "residual", "iterations", "sup_gap"],
            )
        ]
        for solve in solves:
            paths.append(
                self.field(f"elliptic_beta_{solve.beta:g}.csv", solve.field, grid)
            )
        return paths

    def ergodic(
        self,
        estimate: ErgodicEstimate,
        spreads: Sequence[Optional[float]],
        grid: Grid,
    ) -> List[str]:
        """
        Report an ergodic estimate.

        Creates `ergodic.csv` (`beta,lambda_beta,probe_spread`, one row per
        discount rate) and `ergodic_phi.csv`.
        """
        logger.info("Report ergodic estimate as CSV")
        rows = [
            {
                "beta": beta,
                "lambda_beta": lambda_,
                "probe_spread": math.nan if spread is None else spread,
            }
            for beta, lambda_, spread in zip(
                estimate.beta_schedule, estimate.lambda_per_beta, spreads
            )
        ]
        return [
            CSVWriter.dict_to_csv(
                self.target_folder,
                "ergodic.csv",
                rows,
                ["beta", "lambda_beta", "probe_spread"],
            ),
            self.field("ergodic_phi.csv", estimate.phi, grid),
        ]

    def dual_game(
        self,
        saddle: SaddlePoint,
        xi_family: Sequence[IntensityPolicy],
        nu_family: Sequence[IntensityPolicy],
    ) -> str:
        """
        Report a sup-inf search.

        Creates `dualgame.csv` with one row per pair of candidates
        (`xi_id,nu_id,mean,stderr,n_paths`, 1-based ids) and a last row
        `saddle:<xi ref>,saddle:<nu ref>,…` holding the saddle estimate.
        """
        logger.info("Report sup-inf search as CSV")
        headers = ["xi_id", "nu_id", "mean", "stderr", "n_paths"]
        rows: List[Dict[str, Any]] = [
            {
                "xi_id": a + 1,
                "nu_id": b + 1,
                "mean": estimate.mean,
                "stderr": estimate.stderr,
                "n_paths": estimate.n_paths,
            }
            for a, row in enumerate(saddle.table)
            for b, estimate in enumerate(row)
        ]
        rows.append(
            {
                "xi_id": f"saddle:{xi_family[saddle.xi_index].ref}",
                "nu_id": f"saddle:{nu_family[saddle.nu_index].ref}",
                "mean": saddle.estimate.mean,
                "stderr": saddle.estimate.stderr,
                "n_paths": saddle.estimate.n_paths,
            }
        )
        return CSVWriter.dict_to_csv(self.target_folder, "dualgame.csv", rows, headers)

    def summary(
        self,
        header: Mapping[str, str],
        routes: Mapping[str, Tuple[float, str]],
        details: Mapping[str, str],
    ) -> str:
        """
        Write the human readable `summary.txt`.

        Arguments:
            header: `key: value` lines printed under the timestamp.
            routes: `λ` estimate and tolerance tag per route name.
            details: `key: value` lines printed after the pairwise gaps.

        Returns:
            path of the summary.
        """
        lines = [
            "ergoswitch experiment summary",
            f"generated: {arrow.utcnow().format('YYYY-MM-DD HH:mm:ss')} UTC",
        ]
        lines += [f"{key}: {value}" for key, value in header.items()]
        if routes:
            lines += ["", "lambda estimates"]
            lines += [
                f"  {name}: {format_value(value)} [{tag}]"
                for name, (value, tag) in routes.items()
            ]
        if len(routes) > 1:
            lines += ["", "pairwise gaps"]
            lines += [
                f"  {a} vs {b}: {format_value(abs(routes[a][0] - routes[b][0]))}"
                for a, b in itertools.combinations(routes, 2)
            ]
        if details:
            lines += [""]
            lines += [f"{key}: {value}" for key, value in details.items()]

        if not os.path.exists(self.target_folder):
            os.makedirs(self.target_folder)
        path = os.path.join(self.target_folder, "summary.txt")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
        logger.info(f"Summary written to {path}")
        return path
