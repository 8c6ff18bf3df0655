"""Multi-patch NURBS isogeometric linear elasticity with Nitsche coupling of
non-conforming patches."""

from .elasticity import Material, bulk_stiffness, constitutive_matrix, lame_constants
from .errors import (
    DegenerateElementError,
    DomainError,
    IGAError,
    InterfaceMismatchError,
    InvalidPatchError,
    InversionError,
    InvertedElementError,
    MaterialError,
    ModelError,
    ProjectionError,
    SolverError,
)
from .functions import Constant, Polynomial, Timoshenko
from .io import export_vtk, load_model, write_model
from .mesh import Face, box_patch, build_elements, inverse_map, refine_bisect, trace_of_face
from .model import DirichletBC, InterfaceSpec, MultiPatchModel, NeumannBC, locate_point
from .nitsche import assemble_coupling, estimate_alpha, generate_interface_gps
from .solver import SolutionField, SparseSystem, assemble_global, solve
from .spline_core import KnotVector, NurbsPatch, basis_and_derivs, eval_geometry, find_span
from .verification import convergence_study, error_norms

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
