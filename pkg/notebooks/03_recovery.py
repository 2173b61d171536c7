# %% [markdown]
# # Recovering a field from its operator
#
# The full operator determines a field up to a rigid motion. With a reduced
# operator the answer improves as k grows.

# %%
import numpy as np

from fundeform import assemble_E, mesh_basis
from fundeform.operators import project_out_rigid, recovery_matrix, reduced_E
from fundeform.shapes import icosphere, random_sphere, rotation_matrix, tet_ball
from fundeform.solve.pipelines import recover_full, recover_reduced_full_basis

M = random_sphere(300, seed=0, noise=0.05)
R = rotation_matrix([1, 2, 3], np.pi / 6)
V = M.vertices @ R.T - M.vertices
W = recover_full(M, assemble_E(M, V))
print("residual / bbox:", np.linalg.norm(project_out_rigid(M, W - V), axis=1).max() / M.bbox_diagonal())

# %% [markdown]
# The recovery system has a 6-dimensional kernel (rigid motions) on both
# triangle and tet meshes.

# %%
tri = icosphere(2)
print(recovery_matrix(tri).kernel_dim(1e-9), recovery_matrix(tet_ball(tri)).kernel_dim(1e-9))

# %% [markdown]
# Error against k for a smooth random field.

# %%
big = random_sphere(1000, seed=0, noise=0.05)
b100 = mesh_basis(big, 100)
X = b100.evecs[:, 20:60] @ np.random.default_rng(1).normal(size=(40, 3)) * 0.05
X0 = project_out_rigid(big, X)
for k in (10, 30, 60, 100):
    b = b100.truncate(k)
    Xk = recover_reduced_full_basis(big, reduced_E(big, X, b), b)
    print(k, np.linalg.norm(project_out_rigid(big, Xk) - X0) / np.linalg.norm(X0))
