"""BRAM undervolting simulator: fault maps, SECDED, power, NN harness, placement."""

from ._voltsim import *  # noqa: F401,F403
from ._voltsim import __version__  # noqa: F401
