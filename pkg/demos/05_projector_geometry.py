# %% [markdown]
# # Geometry of projector differences
#
# Q = P1 - P0 splits into +-1 eigenvectors and planes carrying eigenvalues
# +-sin(theta).  The same angles give the canonical generator A with
# P1 = e^A P0 e^-A.  Under a charge conjugation C, states with -C Q C = Q fall
# into two classes distinguished by the parity of dim(Ran P  cap  ker P0).

# %%
import numpy as np

from bdfpos import projectors as pj

rng = np.random.default_rng(1)

# %% A 2x2 rotation by pi/4.
P0 = np.diag([1.0, 0.0]).astype(complex)
c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
U = np.array([[c, -s], [s, c]])
dec = pj.decompose_difference(U @ P0 @ U.T, P0)
print("theta =", dec.thetas, " eigenvalues", np.linalg.eigvalsh(pj.reconstruct(dec)))

# %% Random pairs: decomposition, logarithm, exponential.
P1, P2 = pj.random_pair(24, rng)
dec = pj.decompose_difference(P2, P1)
A = pj.canonical_log(P1, P2)
print("principal angles:", np.round(dec.thetas, 4))
print("||A|| =", np.linalg.norm(A, 2), " round trip", np.abs(pj.exp_chart(P1, A) - P2).max())
print("P0-trace of P2 - P1:", pj.p0_trace(P2 - P1, P1))

# %% Pairs at distance one need the pi/2 rotations.
F1, F2 = pj.forced_pair(12, rng)
A = pj.canonical_log(F1, F2)
print("||F2 - F1|| =", np.linalg.norm(F2 - F1, 2), " ||A|| =", np.linalg.norm(A, 2))

# %% C-symmetric states and their classes.
P, P0, C = pj.c_symmetric_instance(6, thetas=(0.5, 1.1), excitations=1, rng=rng)
print(pj.component_classify(P, P0, C))
report = pj.c_symmetric_spectrum_check(P - P0, C)
print("spectrum ok:", report["ok"], [(round(x["mu"], 4), x["dim_mu2"]) for x in report["clusters"]])

# %% Moving along a C-symmetric path never changes the class.
a = pj.c_symmetric_tangent(P, C, rng, scale=2.0)
print([pj.component_classify(pj.exp_chart(P, t * a), P0, C)["component"] for t in np.linspace(0, 1, 5)])
