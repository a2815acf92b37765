# %% [markdown]
# # Binding below the pair threshold
#
# Scanning the trial scale lambda at fixed coupling gives energies below 2m,
# with the minimum near lambda* = g1'(0)^2/(alpha m).  The binding energy
# divided by alpha^2 approaches m E_CP / g1'(0)^2 as alpha shrinks.
# (About a minute per coupling at N = 64; set N = 32 for a quick look.)

# %%
from bdfpos import energy as en
from bdfpos.momentum import ModelParams, solve_dressed_dispersion
from bdfpos.pekar import minimize_pekar

N = 64
pekar = minimize_pekar()

# %% One scan.
table = solve_dressed_dispersion(ModelParams(0.06, 30.0, 1024))
scan = en.lambda_scan(pekar.profile, table, 0.06, points=N)
print(f"2m = {scan.two_m:.8f}, lambda* = {scan.lambda_star:.3f}")
for e in scan.energies[::3]:
    print(f"  lambda/lambda* = {e.lam / scan.lambda_star:6.3f}   E - 2m = {e.total - scan.two_m: .3e}")
print(f"best: lambda/lambda* = {scan.best.lam / scan.lambda_star:.3f}, E - 2m = {scan.best.total - scan.two_m:.6e}")

# %% The coupling sweep, written as plot-ready CSV.
alphas = (0.0, 0.03, 0.06, 0.12)
tables = {a: solve_dressed_dispersion(ModelParams(a, 30.0, 1024)) for a in alphas}
rows = en.alpha_sweep(alphas, tables.__getitem__, pekar, points=N)
print(en.sweep_csv(rows))
for r in rows[1:]:
    print(f"alpha = {r.alpha}: slope error {abs(r.slope / r.reference_slope - 1):.2%}")
