from ergoswitch.config import load_config


def test_load_config(tmp_path):
    path = tmp_path / "experiment.ini"
    path.write_text(
        "[model]\n"
        "preset = two_regime_flat\n"
        "\n"
        "[grid]\n"
        "n_nodes = 81  # h = 0.125\n"
        "\n"
        "[ergodic]\n"
        "betas = 0.2, 0.1\n"
        "probes = 0:1, 1.5:2\n"
    )

    config = load_config(str(path))

    assert config.model.preset == "two_regime_flat"
    assert config.grid.n_nodes == 81
    assert config.ergodic.betas == (0.2, 0.1)
    assert config.ergodic.probes == ((0.0, 1), (1.5, 2))
    # missing sections keep their defaults
    assert config.mc.n_paths == 10_000
