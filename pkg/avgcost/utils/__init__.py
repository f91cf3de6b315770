"""
**utils** package provide a set of generic utility functions and decorators, which are not model-related
(numerical model code belongs to the **mdp**, **splitchain**, **oracles**, **solvers** modules).

important
    This module can be imported by any other module,
    therefore, it should have as few external dependencies as possible,
    and should have no dependency to any other **avgcost** module.
"""

from .config import *
from .core import *
from .os import *
from .process import *
from .time import *

__all__ = [s for s in dir() if not s.startswith('_')]
