"""Bracket the torus weight lambda_* at which the mass-1 minimizer stops
depending on y, then map it to the critical mass c_*.

Run: python demos/02_bifurcation.py   (about 20 s)
"""
from wgnls import ModelParams, SolverConfig, c_star_from_lambda, find_lambda_star, make_grid

p = ModelParams(d=1, alpha=6.0)
cfg = SolverConfig(grid=make_grid(1, 20.0, 512, 16))

res = find_lambda_star(p, cfg, bracket_tol=1e-2)
lo, hi = res.lambda_star_bracket
print(f"reference energy (y-independent, mass 1): {res.reference:.10g}")
print(f"lambda_* in ({lo:.10g}, {hi:.10g}), relative width {hi / lo - 1:.1e}")
print(f"linear-stability threshold {res.lambda_linear:.10g}")

print("\n  lambda          m_1,lambda         y-share     converged")
for pt in res.sweep:
    print(f"  {pt.lam:<14.6g}  {pt.m:<17.10g}  {pt.grady_share:<10.2e}  {pt.converged}")

c_lo, c_hi = c_star_from_lambda(res.lambda_star_bracket, p)
print(f"\nc_* in ({c_lo:.6g}, {c_hi:.6g}); below it minimizers depend on y, above it they do not")
