# %% [markdown]
# # Functional maps with an extrinsic term
#
# The normal-field operator is intrinsic to the shape up to rigid motions,
# so it commutes with the map between a shape and its rotated copy. Adding
# it to the Laplacian commutator resolves the map from five landmarks.

# %%
import numpy as np

from fundeform import assemble_E_normal, mesh_basis
from fundeform.operators import reduce
from fundeform.shapes import random_rotation, random_sphere
from fundeform.solve.fmaps import commutator_norms, fmap_infer, fmap_to_pointmap

M = random_sphere(400, seed=2, noise=0.1)
N = M.with_vertices(M.vertices @ random_rotation(7).T)
bM, bN = mesh_basis(M, 20), mesh_basis(N, 20)
EM, EN = reduce(assemble_E_normal(M), bM), reduce(assemble_E_normal(N), bN)
lm = [(v, v) for v in (0, 50, 100, 200, 300)]
C = fmap_infer(bM, bN, EM, EN, lm)

# %%
print(commutator_norms(C, bM, bN, EM, EN))
pm = fmap_to_pointmap(C, bM, bN)
print("correct vertices:", np.mean(pm == np.arange(N.n_vertices)))
