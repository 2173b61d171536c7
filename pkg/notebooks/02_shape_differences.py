# %% [markdown]
# # Shape differences
#
# The unified shape difference of two shapes with the same connectivity is
# the identity exactly when the deformation is rigid, and a uniform scale by
# s shows up as I / s^2.

# %%
import numpy as np

from fundeform import mesh_basis, shape_difference_same_conn
from fundeform.shapediff import collection_embedding
from fundeform.shapes import grid_plane, random_rotation, random_sphere

M = random_sphere(300, seed=6, noise=0.05)
b = mesh_basis(M, 30)

for name, P in [("rotated", M.vertices @ random_rotation(1).T),
                ("stretched", M.vertices * [1.2, 1, 1]),
                ("scaled", M.vertices * 1.5)]:
    D = shape_difference_same_conn(M, M.with_vertices(P), "unified", b)
    print(name, D.distance_to_identity(), D.matrix[1, 1])

# %% [markdown]
# A sheared plane keeps its area, so the area difference cannot tell the
# shapes of a shear sequence apart while the unified one can.

# %%
base = grid_plane(10, 10)
shapes = [base.with_vertices(base.vertices + np.column_stack(
    [t * base.vertices[:, 1], np.zeros((base.n_vertices, 2))])) for t in (0, .1, .2, .3)]
bb = mesh_basis(base, 30)
for kind in ("area", "conformal", "unified"):
    print(kind, np.round(collection_embedding(base, shapes, kind, bb), 4).tolist())
