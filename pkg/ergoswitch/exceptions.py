from typing import Optional


class ErgoswitchException(Exception):
    message_prefix = ""

    def __init__(self, message, *args, **kwargs):
        message = f"Ergoswitch::{self.message_prefix}::{message}"
        Exception.__init__(self, message, *args, **kwargs)


class ModelException(ErgoswitchException):
    message_prefix = "Model"


class GridException(ErgoswitchException):
    message_prefix = "Grid"


class FieldException(ErgoswitchException):
    message_prefix = "ValueField"


class ObstacleException(ErgoswitchException):
    message_prefix = "Obstacle"


class ParabolicException(ErgoswitchException):
    message_prefix = "Parabolic"


class EllipticException(ErgoswitchException):
    message_prefix = "Elliptic"


class IterationCapException(EllipticException):
    def __init__(
        self,
        message,
        last_residual: float,
        iterations: Optional[int] = None,
        *args,
        **kwargs,
    ):
        self.last_residual = last_residual
        self.iterations = iterations
        EllipticException.__init__(
            self, f"{message} (last residual: {last_residual:.3e})", *args, **kwargs
        )


class ErgodicException(ErgoswitchException):
    message_prefix = "Ergodic"


class MonteCarloException(ErgoswitchException):
    message_prefix = "MonteCarlo"


class ConfigException(ErgoswitchException):
    message_prefix = "Config"
