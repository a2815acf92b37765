# %% [markdown]
# # Dressed dispersion of the vacuum
#
# The self-consistent vacuum replaces the free symbol sqrt(1 + p^2) by
# e(p) = sqrt(g0(p)^2 + g1(p)^2).  The pair (g0, g1) is the fixed point of a
# radial integral map, solved here on a graded grid up to the cutoff.

# %%
import tempfile

import numpy as np

from bdfpos.momentum import ModelParams, cached_dispersion, dispersion_diagnostics, solve_dressed_dispersion

# %% At zero coupling the map returns the free pair exactly.
free = solve_dressed_dispersion(ModelParams(0.0, 30.0, 1024))
print("alpha = 0: max|g0 - 1| =", np.abs(free.g0 - 1).max(), " max|g1 - p| =", np.abs(free.g1 - free.p).max())

# %% A weak coupling dresses the mass and the velocity at the origin.
table = solve_dressed_dispersion(ModelParams(0.05, 30.0, 1024))
diag = dispersion_diagnostics(table)
print(f"iterations {table.iterations}, residual {table.residual:.1e}")
print(f"m = g0(0) = {diag['m']:.7f}   g1'(0) = {diag['g1_slope_at_0']:.7f}")

for p in (0.5, 1.0, 5.0, 20.0):
    g0, g1, e = table.evaluate(np.array([p]))
    print(f"p = {p:5.1f}  g0 = {g0[0]:.6f}  g1/p = {g1[0] / p:.6f}  e = {e[0]:.6f}")

# %% The bounds 1 <= g0 and p <= g1 <= p g0 hold at every node.
print("bounds hold:", bool(np.all(table.g0 >= 1) and np.all(table.p <= table.g1 + 1e-15)
                             and np.all(table.g1 <= table.p * table.g0 + 1e-15)))

# %% Mass renormalization grows with the coupling.
for a in (0.02, 0.05, 0.1):
    d = dispersion_diagnostics(solve_dressed_dispersion(ModelParams(a, 30.0, 512)))
    print(f"alpha = {a:4}: m = {d['m']:.6f}, (m - 1)/alpha = {(d['m'] - 1) / a:.4f}")

# %% Tables are cached as CSV; the second request reads the file back.
with tempfile.TemporaryDirectory() as tmp:
    params = ModelParams(0.05, 30.0, 256)
    _, path, reused = cached_dispersion(params, tmp)
    print(path.name, "reused:", reused)
    _, path, reused = cached_dispersion(params, tmp)
    print(path.name, "reused:", reused)
