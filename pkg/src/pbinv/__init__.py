"""pbinv: numerical laboratory for Poisson-bracket invariants of subsets
of two-dimensional symplectic surfaces."""

__version__ = "0.1.0"

from .errors import (GuaranteeViolation, PbinvError, SceneValidationError,
                     SurfaceMismatchError, UsageError)
from .geometry import (make_surface, Surface, Point, Scene,
                       scene_from_json, scene_to_json, scene_hash,
                       validate_scene)
from .fields import (ScalarField, poisson_bracket, sup_norm, line_integral_FdG,
                     area_integral, iterated_bracket_norm,
                     deformation_positivity, fd_consistency_check)

__all__ = [
    "__version__",
    "PbinvError", "UsageError", "SceneValidationError", "GuaranteeViolation",
    "SurfaceMismatchError",
    "make_surface", "Surface", "Point", "Scene",
    "scene_from_json", "scene_to_json", "scene_hash", "validate_scene",
    "ScalarField", "poisson_bracket", "sup_norm", "line_integral_FdG",
    "area_integral", "iterated_bracket_norm", "deformation_positivity",
    "fd_consistency_check",
]
