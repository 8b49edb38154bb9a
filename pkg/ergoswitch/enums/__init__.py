from enum import Enum


class BoundaryMode(Enum):
    """
    Rule applied on the first and last node of a
    [`Grid`][ergoswitch.discretization.Grid].

    Allowed values are:

     - `DIRICHLET_EXTRAPOLATE`: ghost nodes are linearly extrapolated from the
        two outermost nodes
     - `NEUMANN_ZERO_SLOPE`: ghost nodes copy the outermost node (zero slope
        beyond the boundary)
    """

    DIRICHLET_EXTRAPOLATE = "dirichlet_extrapolate"
    NEUMANN_ZERO_SLOPE = "neumann_zero_slope"


class Stage(Enum):
    """
    Stage of an experiment run from the command line.

    Allowed values are:

     - `PARABOLIC`: time-march the parabolic system
     - `ELLIPTIC`: solve the discounted system for every configured beta
     - `ERGODIC`: vanishing discount extraction of the ergodic pair
     - `DUALGAME`: Monte Carlo estimate of the randomized game
     - `ALL`: every stage above, in that order
    """

    PARABOLIC = "parabolic"
    ELLIPTIC = "elliptic"
    ERGODIC = "ergodic"
    DUALGAME = "dualgame"
    ALL = "all"

    def expand(self):
        """
        List the concrete stages covered by the current one.

        Returns:
            ordered list of stages (never contains `ALL`).
        """
        if self is Stage.ALL:
            return [Stage.PARABOLIC, Stage.ELLIPTIC, Stage.ERGODIC, Stage.DUALGAME]
        return [self]
