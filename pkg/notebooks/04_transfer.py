# %% [markdown]
# # Deformation transfer
#
# Stretch a short bar along x, carry its operator to a bar twice as long
# through a functional map, and solve for a field there. The length change
# should double.

# %%
import numpy as np

from fundeform import mesh_basis
from fundeform.defbasis import build_dictionary
from fundeform.operators import reduced_E
from fundeform.shapes import box
from fundeform.solve.fmaps import fmap_from_pointmap
from fundeform.solve.pipelines import transfer

M = box((2.0, 1.0, 0.8), (12, 4, 4))
N = box((4.0, 1.0, 0.8), (12, 4, 4))
bM, bN = mesh_basis(M, 30), mesh_basis(N, 30)
dN = build_dictionary(N, bN, (60, 0, 60))
U = np.column_stack([0.1 * M.vertices[:, 0], np.zeros((M.n_vertices, 2))])
C = fmap_from_pointmap(np.arange(M.n_vertices), bN, bM)
res = transfer(reduced_E(M, U, bM), C, dN)

# %%
grow = lambda mesh, X: np.ptp(mesh.vertices[:, 0] + X[:, 0]) - np.ptp(mesh.vertices[:, 0])
print(grow(M, U), grow(N, res.field), grow(N, res.field) / grow(M, U))
print("KKT residual", res.solver.kkt_residual)
