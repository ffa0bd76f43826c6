"""Monte-Carlo sampling of the Langevin equations against the Lyapunov solution.

Uses a strongly damped resonator so the run takes seconds; pass
``--p0`` for the full p0 check (about a minute per thousand trajectories).
"""

import sys

import numpy as np

from optomech.lyapunov import steady_state_cm
from optomech.model import PhysicalParams, derive_params, single_mode_model
from optomech.oracle import SimConfig, simulate_cm

if "--p0" in sys.argv:
    d = derive_params(PhysicalParams.p0())
    model = single_mode_model(0.5, 1.0, 1.0, d.gamma_m, d.n0)
    cfg = SimConfig.for_model(model, n_traj=1000, seed=1)
else:
    model = single_mode_model(0.5, 1.0, 1.0, 0.5, 2.0)
    cfg = SimConfig.for_model(model, n_traj=256, seed=1, sample_time=100.0, bias=0.002)

V = steady_state_cm(model).entries
res = simulate_cm(model, cfg)
np.set_printoptions(precision=4, suppress=True)
print(f"dt = {cfg.dt:.3g}, burn-in = {cfg.burn_in:.1f}, trajectories = {cfg.n_traj}")
print("Lyapunov:\n", V)
print("Monte Carlo:\n", res.cm.entries)
print("z-scores:\n", (res.cm.entries - V) / res.stderr)
print("entrywise agreement (3 sigma, 5%):", bool(res.agrees_with(V).all()))
