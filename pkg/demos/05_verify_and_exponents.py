"""Property battery on seeded random fields, and the exact exponent table.

Run: python demos/05_verify_and_exponents.py   (a few seconds)
"""
from fractions import Fraction

from wgnls import RunConfig, exponent_table
from wgnls.runner import verify_battery

cfg = RunConfig(command="verify", seed=7)
cfg.grid.Ny = 16
out = verify_battery(cfg, n_fields=40)
print(f"{out['n_fields']} fields, {out['skipped']} skipped")
print(f"max |K| after projection (relative) {out['max_K_after_projection']:.1e}")
print(f"K/H sign pattern around t*: {out['sign_pattern_ok']} of {out['n_fields'] - out['skipped']}")
print(f"empirical GN constant {out['gn_empirical_C']:.5g}")
print(f"rho certificate margin {out['rho_certificate']['margin']:.4g}")

for d, a in [(1, Fraction(6)), (1, Fraction(15, 2)), (2, Fraction(3))]:
    t = exponent_table((d, a))
    ok = all(t.identities().values())
    print(f"d={d}, alpha={a}: identities hold exactly: {ok}")
