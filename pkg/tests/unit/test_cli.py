import os

import pytest
from click.testing import CliRunner

from ergoswitch.cli import cli


SMALL_EXPERIMENT = """
[model]
preset = two_regime_flat

[grid]
x_min = -2
x_max = 2
n_nodes = 5

[parabolic]
t_max = 2
snapshot_times = 1

[elliptic]
betas = 0.5

[ergodic]
betas = 0.5, 0.25
probes = 0:1, 1:2

[mc]
n_paths = 50
dt = 0.05
seed = 3
beta = 1
"""

STEEP_TABLE = """
[model]
table = coefficients.csv
m = 1
switch_costs = 0
gamma = 1
lipschitz_f = 1

[grid]
n_nodes = 5

[parabolic]
t_max = 1
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    (tmp_path / "coefficients.csv").write_text(
        "x,b_1_1,sigma_1_1,f_1_1,g_1\n-5,5,1,25,0\n0,0,1,0,0\n5,-5,1,25,0\n"
    )

    def write(text):
        path = tmp_path / "experiment.ini"
        path.write_text(text)
        return str(path)

    return write


class TestValidate:
    def test_passed(self, runner, write_config):
        result = runner.invoke(cli, ["validate", write_config(SMALL_EXPERIMENT)])

        assert result.exit_code == 0
        assert result.output.count("[PASS]") == 4
        for name in (
            "dissipativity",
            "no_free_loop",
            "terminal_consistency",
            "lipschitz",
        ):
            assert name in result.output

    def test_failed(self, runner, write_config):
        result = runner.invoke(cli, ["validate", write_config(STEEP_TABLE)])

        assert result.exit_code == 1
        assert "[FAIL] lipschitz" in result.output

    def test_invalid_config(self, runner, write_config):
        result = runner.invoke(cli, ["validate", write_config("[grid]\nx_min = 1\n")])

        assert result.exit_code == 2
        assert "exactly one of preset or table" in result.output

    def test_missing_config(self, runner, tmp_path):
        result = runner.invoke(cli, ["validate", str(tmp_path / "missing.ini")])

        assert result.exit_code == 2
        assert "config file not found" in result.output


class TestRun:
    def test_all_stages(self, runner, write_config, tmp_path):
        out = str(tmp_path / "out")

        result = runner.invoke(
            cli, ["run", write_config(SMALL_EXPERIMENT), "--out", out]
        )

        assert result.exit_code == 0, result.output
        assert f"summary written to {os.path.join(out, 'summary.txt')}" in (
            result.output
        )
        assert sorted(os.listdir(out)) == [
            "dualgame.csv",
            "elliptic.csv",
            "elliptic_beta_0.5.csv",
            "ergodic.csv",
            "ergodic_phi.csv",
            "parabolic.csv",
            "parabolic_T_1.csv",
            "parabolic_T_2.csv",
            "summary.txt",
        ]
        with open(os.path.join(out, "summary.txt")) as f:
            summary = f.read()
        assert "stages: parabolic, elliptic, ergodic, dualgame" in summary
        assert "  parabolic: " in summary
        assert "  richardson: " in summary
        assert "dual game value: " in summary

    def test_single_stage(self, runner, write_config, tmp_path):
        out = str(tmp_path / "out")

        result = runner.invoke(
            cli,
            [
                "run",
                write_config(SMALL_EXPERIMENT),
                "--stage",
                "parabolic",
                "--out",
                out,
            ],
        )

        assert result.exit_code == 0, result.output
        assert sorted(os.listdir(out)) == [
            "parabolic.csv",
            "parabolic_T_1.csv",
            "parabolic_T_2.csv",
            "summary.txt",
        ]

    def test_seed_override(self, runner, write_config, tmp_path):
        out = str(tmp_path / "out")

        result = runner.invoke(
            cli,
            [
                "run",
                write_config(SMALL_EXPERIMENT),
                "--stage",
                "dualgame",
                "--seed",
                "11",
                "--out",
                out,
            ],
        )

        assert result.exit_code == 0, result.output
        with open(os.path.join(out, "summary.txt")) as f:
            assert "(seed 11, beta=1" in f.read()

    def test_negative_seed(self, runner, write_config, tmp_path):
        result = runner.invoke(
            cli,
            ["run", write_config(SMALL_EXPERIMENT), "--seed", "-1"],
        )

        assert result.exit_code == 2
        assert "seed must be nonnegative" in result.output

    def test_unknown_stage(self, runner, write_config):
        result = runner.invoke(
            cli, ["run", write_config(SMALL_EXPERIMENT), "--stage", "solve"]
        )

        assert result.exit_code == 2

    def test_validation_failed(self, runner, write_config, tmp_path):
        out = tmp_path / "out"

        result = runner.invoke(
            cli, ["run", write_config(STEEP_TABLE), "--out", str(out)]
        )

        assert result.exit_code == 1
        assert "validation failed, use --force to run anyway" in result.output
        assert not out.exists()

    def test_force(self, runner, write_config, tmp_path):
        out = str(tmp_path / "out")

        result = runner.invoke(
            cli,
            [
                "run",
                write_config(STEEP_TABLE),
                "--stage",
                "parabolic",
                "--out",
                out,
                "--force",
            ],
        )

        assert result.exit_code == 0, result.output
        assert "[FAIL] lipschitz" in result.output
        assert os.path.exists(os.path.join(out, "parabolic.csv"))

    def test_stage_failed(self, runner, write_config, tmp_path):
        path = write_config(
            "[model]\npreset = two_regime_flat\n"
            "[grid]\nn_nodes = 5\n"
            "[mc]\nhorizon = 1\nbeta = 0.1\n"
        )

        result = runner.invoke(
            cli, ["run", path, "--stage", "dualgame", "--out", str(tmp_path / "out")]
        )

        assert result.exit_code == 1
        assert "stage dualgame failed" in result.output
        assert "too short" in result.output
