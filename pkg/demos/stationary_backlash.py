"""When does the backlash never move?

For a small input the backlash state can stay constant over a whole period.
The set of such initial states is found from the linear part alone. For
each candidate z0 the output must stay within the backlash set around z0
for all t in [0, T]. The script compares that verdict with simulation, then
looks for any stationary state at all as the amplitude grows.

    python demos/stationary_backlash.py
"""

import numpy as np

from backlashcert import scenario
from backlashcert.linear_subsystem import phi_scan
from backlashcert.localization import stationary_emptiness, stationary_membership
from backlashcert.sweeping_sim import SimConfig, simulate

scen = scenario.builtin("desk2d_small")
model, theta, inp, T = scen.model, scen.theta, scen.inp, scen.inp.period
margin, t_min, _, _ = phi_scan(model, T, 512)
print(f"Phi(t) stays invertible on [0, T]: smallest singular value {margin:.4f} at t = {t_min:.3f}")

x0 = np.zeros(2)
print(f"\n{'z0':>7} {'verdict':>8} {'margin':>8} {'simulated path':>15}")
for z0 in np.linspace(-0.2, 0.2, 9):
    v = stationary_membership(model, theta, inp, x0, [z0], T)
    tr = simulate(model, theta, inp, SimConfig(x0=x0, z0=[z0], steps_per_period=4096, periods=1))
    print(f"{z0:7.3f} {str(v.member):>8} {v.margin:8.4f} {tr.dz_norm.sum():15.3e}")

print("\nstationary states starting from x0 = 0:")
for amp in (0.3, 1.0, 2.0):
    s = scenario.desk2d(amplitude=amp)
    res = stationary_emptiness(s.model, s.theta, s.inp, x0, T, rng_seed=scen.seed)
    witness = "" if res.empty or res.witness is None else f"  witness z0 = {np.round(res.witness, 4)}"
    print(f"  amplitude {amp:3.1f}: {res.status}{witness}")
