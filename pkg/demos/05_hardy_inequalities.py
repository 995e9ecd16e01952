"""
Weighted Hardy inequalities near the boundary
=============================================

Empirical constants over a family of profiles, inside and outside the
parameter windows.
"""
import numpy as np

from fene.inequality_lab import InequalityKind, RadialProfile, default_family, empirical_constant, evaluate_sides, wsi_exponent

# a closed-form check: psi = x, k = 1 gives the ratio 4
sides = evaluate_sides(InequalityKind("hardy_inter", 1.0), RadialProfile.from_function(lambda x: x, per_decade=128))
print("hardy_inter, psi = x:", sides.lhs, sides.rhs, sides.ratio)

for kind in (InequalityKind("hardy1", 1.5), InequalityKind("hardy_inter2", 0.8, 0.3), InequalityKind("hardy_inter_log", 1.0, 0.5, 1.0)):
    rep = empirical_constant(kind, default_family(kind.k))
    print(f"{kind.tag:16s} k = {kind.k}: sups per level {np.round(rep.sups, 4)}, change {rep.relative_change:.4f}, worst profile {rep.argmax[-1]}")

# k = 0.9 is outside the window of the first inequality: the constant blows up
rep = empirical_constant(InequalityKind("hardy1", 0.9), default_family(0.9), override=True)
print("hardy1 at k = 0.9 (diagnostic only):", np.round(rep.sups, 1), "growth", np.round(rep.growth, 2))

p_best, table = wsi_exponent()
print("largest refinement-stable Sobolev exponent:", p_best, {p: np.round(v, 4) for p, v in table.items()})
