"""Back-action versus cold-damping cooling at the p0 operating point."""

import math

from optomech.cooling import FeedbackConfig, feedback_variances, lyapunov_cooling, optimize_feedback
from optomech.model import PhysicalParams, coupling_from_power, derive_params

W_M = PhysicalParams.p0().omega_m


def backaction(power=0.01, kappa=0.37):
    p = PhysicalParams.p0(kappa=kappa * W_M)
    d = derive_params(p)
    G = coupling_from_power(p, 1.0, power)
    r = lyapunov_cooling(G, 1.0, kappa, d.gamma_m, d.n0)
    print(f"back-action  P = {power * 1e3:4.0f} mW  G = {G:.3f}  n = {r.n:.3f}  "
          f"var_q/var_p = {r.equipartition_ratio:.3f}")


def cold_damping(power=0.05, kappa=5.0, omega_fb=3.5):
    p = PhysicalParams.p0(kappa=kappa * W_M)
    d = derive_params(p)
    G = coupling_from_power(p, 0.0, power)
    opt = optimize_feedback(G, kappa, d.gamma_m, d.n0, {"g_cd": (0.05, 4.0)},
                            fixed={"omega_fb": omega_fb}, points=24, thermal_ratio=d.thermal_ratio)
    r = feedback_variances(G, kappa, d.gamma_m, d.n0, FeedbackConfig(opt.g_cd, omega_fb),
                           thermal_ratio=d.thermal_ratio)
    print(f"cold damping P = {power * 1e3:4.0f} mW  best g_cd = {opt.g_cd:.3f}  n = {r.n:.3f}  "
          f"var_q/var_p = {r.equipartition_ratio:.3f}")
    for th in (0.0, 0.13):
        n = feedback_variances(G, kappa, d.gamma_m, d.n0, FeedbackConfig(1.2, omega_fb, th * math.pi),
                               thermal_ratio=d.thermal_ratio).n
        print(f"  g_cd = 1.2, theta = {th:.2f} pi: n = {n:.4f}")


if __name__ == "__main__":
    print(f"thermal occupancy at 0.6 K: {derive_params(PhysicalParams.p0()).n0:.1f}")
    for P in (0.005, 0.01, 0.02):
        backaction(P)
    cold_damping()
