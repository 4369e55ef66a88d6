"""Boundary element solver for 2D sound-soft scattering by nonconvex polygons,
with an oscillation-adapted hp Galerkin space and a conventional-BEM oracle."""

from .errors import (ClassificationError, ConfigurationError, CostGuardError,
                     DomainError, GeometryError, HnaBemError, SingularityError,
                     SolverError)
from .geometry import (IncidentWave, PolygonModel, SideDescriptor,
                       make_square, make_test_polygon, make_triangle,
                       validate_class_c)
from .hna_space import SpaceParams, build_space
from .operators import OperatorConfig
from .galerkin import QuadConfig, assemble, condition_number, solve

__version__ = "0.1.0"
