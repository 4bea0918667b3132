"""Sample the ground-state curve c -> m_c and evaluate the mass-energy
indicator on a small (mass, energy) grid.

Run: python demos/03_curve_and_mei.py   (about a minute)
"""
import numpy as np

from wgnls import ModelParams, SolverConfig, make_grid, mc_curve, mei, mei_grid

p = ModelParams(d=1, alpha=6.0)
cfg = SolverConfig(grid=make_grid(1, 20.0, 512, 16))

cs = np.geomspace(17.0, 40.0, 6)
curve, rows = mc_curve(cs, p, cfg)
print("   c        m_c          PDE residual")
for r in rows:
    print(f"  {r['c']:<8.4g} {r['m']:<12.6g} {r['residual_pde']:.1e}")
print(f"m_c decreases: {all(np.diff(curve.m) < 0)}")

# The indicator is finite below the curve and infinite on or above it;
# it grows as (c, h) approaches the curve.
c_mid = 25.0
m_mid = float(np.interp(c_mid, curve.c, curve.m))
for h in (0.5 * m_mid, 0.99 * m_mid, m_mid, 2 * m_mid):
    print(f"mei({c_mid}, {h:.4g}) = {mei(c_mid, h, curve):.4g}")

table = mei_grid(np.linspace(18, 38, 5), np.linspace(0.0, 0.3, 4), curve)
print("\nmei on a 5 x 4 grid (rows: mass, columns: energy)")
print(np.array2string(table, precision=4))
