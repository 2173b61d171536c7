# %% [markdown]
# # Deformation fields as operators
#
# A vertex field V on a mesh acts on pairs of scalar functions through a
# symmetric matrix H. Its reduced form in k Laplace-Beltrami eigenfunctions
# is a small k x k matrix, which is what the rest of the library works with.

# %%
import numpy as np

from fundeform import assemble_E, assemble_E_normal, mesh_basis, modified_stiffness
from fundeform.operators import reduce
from fundeform.shapes import icosphere, random_sphere

# %% [markdown]
# H is the first-order change of the (modified) stiffness matrix along V.
# A central difference should agree to O(t^2).

# %%
M = random_sphere(500, seed=0)
V = np.random.default_rng(0).normal(size=(M.n_vertices, 3)) * 0.05
H = assemble_E(M, V).toarray()
for t in (1e-2, 1e-3, 1e-4):
    Wp = modified_stiffness(M, M.with_vertices(M.vertices + t * V)).toarray()
    Wm = modified_stiffness(M, M.with_vertices(M.vertices - t * V)).toarray()
    print(t, np.linalg.norm((Wp - Wm) / (2 * t) - H) / np.linalg.norm(H))

# %% [markdown]
# Rigid motions are invisible: a rotation field gives H = 0 up to round-off.

# %%
W = np.cross([0.3, -1.0, 0.5], M.vertices) + [1.0, 2.0, 3.0]
print(abs(assemble_E(M, W)).max())

# %% [markdown]
# The normal field on a sphere of radius r acts like -2/r times the
# identity on the reduced basis (the constant function excluded).

# %%
for r in (0.5, 1.0, 2.0):
    S = icosphere(3, radius=r)
    E = reduce(assemble_E_normal(S), mesh_basis(S, 20))
    print(r, np.diag(E)[1:6] * r / -2)
