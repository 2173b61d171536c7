"""Solvers and application pipelines."""

from .fmaps import (blend_fmaps, commutator_norms, fmap_from_pointmap, fmap_infer,
                    fmap_to_pointmap, landmark_coefficients)
from .l1 import L1LSProblem, L1Result, kkt_residual, solve_l1ls
from .pipelines import design, design_joint, recover_field, recover_full, transfer
from .symmetry import SymmetrizationState, symmetrize
