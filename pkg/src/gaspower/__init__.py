"""Transient simulation and optimal control of coupled gas-power networks."""

__version__ = "0.1.0"

from .gas import GasConstants                                   # noqa: F401
from .network import Network, NetworkError, build_network       # noqa: F401
from .solver import NewtonConfig, SimulationResult              # noqa: F401
