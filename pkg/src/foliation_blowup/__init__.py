"""
Numerical blow-up of singular foliations.

Subspace limits in Grassmannians (``grassmann``), polynomial foliations
(``foliation``), sampled blow-up fibers (``blowup``), matrix Lie group actions
and their blow-up groupoids (``group_action``), path-holonomy charts
(``holonomy``) and a scenario runner (``cli``).
"""

from .blowup import BlowupPoint, FiberConfig, blowup_fiber
from .errors import INCONCLUSIVE, FoliationBlowupError
from .foliation import FoliationModule, PolyVectorField
from .grassmann import Subspace
from .group_action import GroupoidElement, LieAlgebraAction

__version__ = "0.1.0"

__all__ = [
    "BlowupPoint",
    "FiberConfig",
    "FoliationBlowupError",
    "FoliationModule",
    "GroupoidElement",
    "INCONCLUSIVE",
    "LieAlgebraAction",
    "PolyVectorField",
    "Subspace",
    "blowup_fiber",
]
