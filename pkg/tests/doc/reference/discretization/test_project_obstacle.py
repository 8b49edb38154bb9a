import numpy as np

from ergoswitch import ValueField, build_grid, preset
from ergoswitch.discretization import project_obstacle


def test_project_obstacle():
    model = preset("two_regime_flat")
    grid = build_grid(-1.0, 1.0, 3)

    # GIVEN regime 1 worth less than switching to regime 2 (cost 0.1)
    V = ValueField.constant(grid, [9.0, 10.0])

    # WHEN the field is projected
    projected = project_obstacle(V, model, grid)

    # THEN regime 1 is lifted to the value of a switch
    np.testing.assert_allclose(projected.values, [[9.9, 10.0]] * 3)
