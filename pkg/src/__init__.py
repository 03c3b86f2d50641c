"""
Hénon Heights Core Modules
"""

from .henon_core import HenonMap, ElementaryHenon, Point2, UniPoly, MapSpecError, ComputationRefused
from .arch_green import green, green_total, escape_data
from .nonarch_green import padic_green, relevant_places
from .heights import canonical_height, HeightCache, HeightPrecisionError
from .periodic import periodic_modp, periodic_numeric, rational_periodic_points, common_periodic
from .family_sweep import HenonFamily, sweep_common_periodic, ExcludedParameterError
from .config import RunConfig, resolve_config

__all__ = [
    'HenonMap',
    'ElementaryHenon',
    'Point2',
    'UniPoly',
    'MapSpecError',
    'ComputationRefused',
    'green',
    'green_total',
    'escape_data',
    'padic_green',
    'relevant_places',
    'canonical_height',
    'HeightCache',
    'HeightPrecisionError',
    'periodic_modp',
    'periodic_numeric',
    'rational_periodic_points',
    'common_periodic',
    'HenonFamily',
    'sweep_common_periodic',
    'ExcludedParameterError',
    'RunConfig',
    'resolve_config',
]
