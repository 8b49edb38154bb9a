from tests.unit.factories.dual_game import McConfigFactory, PolicyFactory
from tests.unit.factories.grid import GridFactory
from tests.unit.factories.model import ModelFactory, TwoRegimeModelFactory


__all__ = [
    "GridFactory",
    "McConfigFactory",
    "ModelFactory",
    "PolicyFactory",
    "TwoRegimeModelFactory",
]
