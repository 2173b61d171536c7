"""Extrinsic deformation fields as functional operators on triangle and tet meshes."""

from .errors import (ConnectivityMismatch, ConvergenceFailure, DegenerateSimplex,
                     DegenerateStep, FunDeformError, Infeasible, InputError, MaxIterExceeded,
                     NonManifold, NumericalError, ParseError, RankDeficientWarning, SingularC,
                     ZeroNormal)
from .mesh import TetMesh, TriMesh, face_frame, vertex_normals
from .io import load_mesh, save_mesh, load_matrix, save_matrix, load_field, save_field
from .fem import ReducedBasis, build_mass, build_stiffness, divergence, eigenbasis, grad, mesh_basis
from .operators import (ambient_jacobian, assemble_E, assemble_E_normal, curvature_eigenfunctions,
                        recovery_matrix, reduced_E, strain_form)
from .shapediff import (ShapeDifference, collection_embedding, infinitesimal_shape_diffs,
                        modified_stiffness, shape_difference_fmap, shape_difference_same_conn)

__version__ = "0.1.0"
