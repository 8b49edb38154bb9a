import math

import pytest
from freezegun import freeze_time

from ergoswitch.discretization import ValueField
from ergoswitch.dual_game import McEstimate, SaddlePoint
from ergoswitch.elliptic import EllipticSolve, PenalizedSolve
from ergoswitch.ergodic import ErgodicEstimate
from ergoswitch.parabolic import ParabolicRun
from ergoswitch.reporting.csv import CSVWriter, ReportingCSV, format_value
from tests.unit.factories import GridFactory, PolicyFactory


@pytest.fixture
def grid():
    return GridFactory(x_min=0.0, x_max=1.0, n_nodes=3)


def read(path):
    with open(path) as f:
        return f.read()


class TestFormatValue:
    @pytest.mark.parametrize(
        ["value", "expected"],
        [
            pytest.param(0.1, "0.10000000000000001", id="float"),
            pytest.param(1.0, "1", id="integral float"),
            pytest.param(math.nan, "nan", id="nan"),
            pytest.param(3, "3", id="int"),
            pytest.param("saddle:xi-1", "saddle:xi-1", id="str"),
        ],
    )
    def test_format(self, value, expected):
        assert format_value(value) == expected


class TestCSVWriter:
    def test_dict_to_csv(self, tmp_path):
        folder = str(tmp_path / "nested" / "folder")

        path = CSVWriter.dict_to_csv(
            folder, "out.csv", [{"a": 0.5, "b": 2}, {"a": 1 / 3, "b": "x"}], ["a", "b"]
        )

        assert read(path) == "a,b\n0.5,2\n0.33333333333333331,x\n"


class TestReportingCSV:
    def test_parabolic(self, tmp_path, grid):
        run = ParabolicRun(
            snapshots=[
                (1.0, ValueField.constant(grid, [0.9, 1.0])),
                (2.5, ValueField.constant(grid, [2.4, 2.5])),
            ],
            averages=[(1.0, 0.9), (2.5, 0.96)],
            dt=0.1,
            cfl_bound=0.5,
            probe_node=1,
            probe_regime=0,
        )

        paths = ReportingCSV(str(tmp_path)).parabolic(run, grid)

        assert [p.rsplit("/", 1)[-1] for p in paths] == [
            "parabolic.csv",
            "parabolic_T_1.csv",
            "parabolic_T_2.5.csv",
        ]
        assert read(paths[0]) == (
            "T,lambda_T,probe_value\n"
            "1,0.90000000000000002,0.90000000000000002\n"
            "2.5,0.95999999999999996,2.3999999999999999\n"
        )
        assert read(paths[2]).startswith("x,regime_1,regime_2\n0,2.3999999999999999,")

    def test_elliptic(self, tmp_path, grid):
        field = ValueField.constant(grid, [9.9, 10.0])
        solve = EllipticSolve(
            beta=0.1,
            field=field,
            n_schedule=[1.0, 2.0],
            cauchy_gaps=[0.5],
            obstacle_residual=0.0,
            penalty_gap=0.01,
            converged=True,
            levels=[
                PenalizedSolve(0.1, 1.0, field, 0.25, 120),
                PenalizedSolve(0.1, 2.0, field, 0.125, 30),
            ],
        )

        paths = ReportingCSV(str(tmp_path)).elliptic([solve], grid)

        assert paths[1].endswith("elliptic_beta_0.1.csv")
        assert read(paths[0]) == (
            "beta,n,residual,iterations,sup_gap\n"
            "0.10000000000000001,1,0.25,120,nan\n"
            "0.10000000000000001,2,0.125,30,0.5\n"
        )

    def test_ergodic(self, tmp_path, grid):
        estimate = ErgodicEstimate(
            lambda_=0.99,
            phi=ValueField.constant(grid, [0.0, 0.1]),
            beta_schedule=[0.5, 0.1],
            lambda_per_beta=[0.95, 0.99],
            richardson_lambda=1.0,
            residual=0.0,
            reference_node=1,
            reference_regime=0,
        )

        paths = ReportingCSV(str(tmp_path)).ergodic(estimate, [None, 0.25], grid)

        assert read(paths[0]) == (
            "beta,lambda_beta,probe_spread\n"
            "0.5,0.94999999999999996,nan\n"
            "0.10000000000000001,0.98999999999999999,0.25\n"
        )
        assert paths[1].endswith("ergodic_phi.csv")

    def test_dual_game(self, tmp_path):
        table = [
            [McEstimate(0.5, 0.01, 100, 3), McEstimate(0.25, 0.02, 100, 3)],
            [McEstimate(0.75, 0.01, 100, 3), McEstimate(0.5, 0.01, 100, 3)],
        ]
        saddle = SaddlePoint(1, 1, table[1][1], table)
        xi_family = [PolicyFactory(ref="xi-1"), PolicyFactory(ref="xi-2")]
        nu_family = [PolicyFactory(ref="nu-1"), PolicyFactory(ref="nu-2")]

        path = ReportingCSV(str(tmp_path)).dual_game(saddle, xi_family, nu_family)

        assert read(path) == (
            "xi_id,nu_id,mean,stderr,n_paths\n"
            "1,1,0.5,0.01,100\n"
            "1,2,0.25,0.02,100\n"
            "2,1,0.75,0.01,100\n"
            "2,2,0.5,0.01,100\n"
            "saddle:xi-2,saddle:nu-2,0.5,0.01,100\n"
        )

    @freeze_time("2026-01-02 03:04:05")
    def test_summary(self, tmp_path):
        reporting = ReportingCSV(str(tmp_path / "run"))

        path = reporting.summary(
            {"config": "experiment.ini", "stages": "ergodic"},
            {"beta_V_beta": (0.99, "beta=0.1"), "richardson": (1.0, "residual")},
            {"dual game value": "0.85"},
        )

        assert read(path) == (
            "ergoswitch experiment summary\n"
            "generated: 2026-01-02 03:04:05 UTC\n"
            "config: experiment.ini\n"
            "stages: ergodic\n"
            "\n"
            "lambda estimates\n"
            "  beta_V_beta: 0.98999999999999999 [beta=0.1]\n"
            "  richardson: 1 [residual]\n"
            "\n"
            "pairwise gaps\n"
            "  beta_V_beta vs richardson: 0.010000000000000009\n"
            "\n"
            "dual game value: 0.85\n"
        )

    @freeze_time("2026-01-02 03:04:05")
    def test_summary_without_routes(self, tmp_path):
        path = ReportingCSV(str(tmp_path)).summary({"stages": "dualgame"}, {}, {})

        assert read(path) == (
            "ergoswitch experiment summary\n"
            "generated: 2026-01-02 03:04:05 UTC\n"
            "stages: dualgame\n"
        )
