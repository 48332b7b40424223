"""Backlash sets: support functions, projections and strong convexity.

Balls and ellipsoids are the two set types a scenario can name. This script
shows the queries the dynamics use and checks the normal-cone inequalities
that the contraction argument relies on.

    python demos/backlash_sets.py
"""

import numpy as np

from backlashcert import convex_sets as cs

ball = cs.Ball([0.0, 0.0], 0.2)
ellipse = cs.Ellipsoid([0.1, 0.0], [[0.09, 0.02], [0.02, 0.04]])

for name, S in (("ball", ball), ("ellipse", ellipse)):
    print(f"{name}: diameter {S.diameter():.4f}, max norm {S.max_norm():.4f}, "
          f"strong convexity radius {S.strong_convexity_constant():.4f}")
    u = np.array([1.0, 1.0]) / np.sqrt(2)
    print(f"  support in direction {u.round(3)}: {S.support(u):.4f}")
    far = np.array([1.0, -0.5])
    p = S.project(far)
    print(f"  projection of {far} is {p.round(4)}, outward normal {(-S.inward_normal(p)).round(4)}")

    # projections never increase distances
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 10_000, 2))
    gap = np.linalg.norm(S.project(a) - S.project(b), axis=1) - np.linalg.norm(a - b, axis=1)
    print(f"  worst nonexpansiveness gap over 1e4 pairs: {gap.max():.2e}")

    report = cs.check_normal_inequalities(S, trials=2000, rng_seed=1)
    print(f"  normal-cone inequalities: passed={report.passed}, worst violation {report.max_violation:.2e}")

# the ellipse sits inside a ball of its strong convexity radius around any
# boundary point pushed inwards along the normal
R = ellipse.strong_convexity_constant()
print(f"ball inclusion violation at R: {cs.ball_inclusion_violation(ellipse, R, count=400):.2e}")
print(f"ball inclusion violation at 0.9 R: {cs.ball_inclusion_violation(ellipse, 0.9 * R, count=400):.2e}")
