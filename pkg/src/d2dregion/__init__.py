"""Operational regions of D2D-enabled cellular downlinks.

Submodules: ``kernel`` (special functions and root finding), ``model``
(general-load rates), ``heavy_load`` (objective, optimal mode parameters and
regions), ``montecarlo`` (simulation ground truth) and ``cli``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .heavy_load import HeavyLoadCoefficients, SchemeResult, coefficients, optimize_scheme, region_membership
from .model import Deployment, DesignParams, OperationalPoint, Scheme, Selection, constrained_design

__all__ = [
    "Deployment",
    "DesignParams",
    "HeavyLoadCoefficients",
    "OperationalPoint",
    "Scheme",
    "SchemeResult",
    "Selection",
    "coefficients",
    "constrained_design",
    "optimize_scheme",
    "region_membership",
    "__version__",
]
