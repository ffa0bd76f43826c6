"""Acceptance criteria 1-13, each at its stated tolerance.

Every test records a one-line detail; the terminal summary prints a
PASS/FAIL line per criterion (see conftest.py).
"""

import json
import math
import os
import time

import numpy as np
import pytest

from optomech.cli import main
from optomech.cooling import (FeedbackConfig, asymptotic_feedback_variances, feedback_variances,
                              lyapunov_cooling, optimize_feedback, perturbative_occupancy)
from optomech.gaussian import (BipartiteBlocks, en_upper_bound, log_negativity,
                               log_negativity_modes, random_physical_cm, simon_criterion,
                               tripartite_class, two_mode_squeezed)
from optomech.lyapunov import solve_lyapunov, steady_state_cm
from optomech.model import (PhysicalParams, coupling_from_power, derive_params, hybrid_model,
                            power_for_coupling, single_mode_model, thermal_ratio_from_n0,
                            two_mode_model)
from optomech.oracle import SimConfig, simulate_cm
from optomech.output_modes import FilterSpec, output_cm, sideband_entanglement, two_mode_output_cm
from optomech.stability import balanced_condition_check, routh_hurwitz_single

from conftest import GAMMA_M, N0_P0

W_M = PhysicalParams.p0().omega_m
X0 = thermal_ratio_from_n0(N0_P0)


def detail(record_property, text):
    record_property("detail", text)
    print(text)


def random_stable_pair(rng, n):
    A = rng.normal(size=(n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + rng.uniform(0.05, 1.0)) * np.eye(n)
    B = rng.normal(size=(n, n))
    return A, B @ B.T


@pytest.mark.criterion(1)
def test_lyapunov_exactness(record_property):
    t0 = time.perf_counter()
    g = GAMMA_M
    A = np.array([[0.0, 1.0], [-1.0, -g]])
    D = np.diag([0.0, g * (2 * N0_P0 + 1)])
    V = solve_lyapunov(A, D).entries
    err_thermal = np.max(np.abs(V - (N0_P0 + 0.5) * np.eye(2))) / (N0_P0 + 0.5)

    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        n = 2 * int(rng.integers(1, 5))
        A, D = random_stable_pair(rng, n)
        V = solve_lyapunov(A, D).entries
        worst = max(worst, np.max(np.abs(A @ V + V @ A.T + D)) / np.max(np.abs(D)))
    elapsed = time.perf_counter() - t0
    detail(record_property, f"thermal rel err {err_thermal:.1e}, worst residual {worst:.1e}|D|, "
                            f"{elapsed:.2f} s")
    assert err_thermal <= 1e-10
    assert worst < 1e-10
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_oracle_equivalence(record_property):
    model = single_mode_model(0.5, 1.0, 1.0, GAMMA_M, N0_P0)
    V = steady_state_cm(model).entries
    # a 0.4% step-size budget keeps the O(dt) Euler bias near half a standard error
    cfg = SimConfig.for_model(model, n_traj=2000, seed=2024, bias=0.004)
    cfg.validate(model)
    res = simulate_cm(model, cfg, workers=os.cpu_count())
    z = np.abs(res.cm.entries - V) / res.stderr
    scale = np.sqrt(np.outer(np.diag(V), np.diag(V)))
    rel = np.abs(res.cm.entries - V) / scale
    ok = res.agrees_with(V, n_sigma=3.0, rel=0.05)
    detail(record_property, f"2000 trajectories, dt = {cfg.dt:.3g}, burn-in {cfg.burn_in:.0f}; "
                            f"max z = {z.max():.2f}, max rel = {rel.max():.3f}")
    assert np.all(ok)


@pytest.mark.criterion(3)
def test_routh_hurwitz_agreement(record_property):
    rng = np.random.default_rng(3)
    compared = mismatches = 0
    for _ in range(2000):
        G, D = rng.uniform(0, 3), rng.uniform(-3, 3)
        k, g = 10 ** rng.uniform(-2, 0.5), 10 ** rng.uniform(-5, -1)
        r = routh_hurwitz_single(G, D, k, g)
        assert (r.eta > 0) == (r.s2 > 0)
        if abs(r.eta) < 1e-6:
            continue
        lam = np.max(np.linalg.eigvals(single_mode_model(G, D, k, g, 1.0).drift).real)
        compared += 1
        mismatches += (r.s1 > 0 and r.s2 > 0) != (lam < 0)
    detail(record_property, f"{compared} draws outside the band, {mismatches} mismatches")
    assert compared >= 1000 and mismatches == 0


@pytest.mark.criterion(4)
def test_balanced_two_mode_invariance(record_property):
    drifts = []
    for kappa in (0.5, 1.0, 2.0):
        m = two_mode_model(2.0, 2.0, 1.0, -1.0, kappa, GAMMA_M, N0_P0)
        chk = balanced_condition_check(m)
        assert chk.balanced
        drifts.append(chk.eigenvalue_drift)
    detail(record_property, f"max eigenvalue shift at G = 2: {max(drifts):.1e} omega_m")
    assert max(drifts) < 1e-10


@pytest.mark.criterion(5)
def test_entanglement_closed_form(record_property):
    errs = [abs(log_negativity(BipartiteBlocks.from_cm(two_mode_squeezed(r))) - 2 * r)
            for r in (0.3, 1.0)]
    rng = np.random.default_rng(5)
    agree = entangled = 0
    for _ in range(200):
        b = BipartiteBlocks.from_cm(random_physical_cm(2, rng, max_squeeze=0.8, max_thermal=0.6))
        en = log_negativity(b)
        agree += simon_criterion(b) == (en > 0)
        entangled += en > 0
    detail(record_property, f"|E_N - 2r| <= {max(errs):.1e}; Simon agrees on {agree}/200 "
                            f"({entangled} entangled)")
    assert max(errs) < 1e-9
    assert agree == 200 and 0 < entangled < 200


@pytest.mark.criterion(6)
def test_backaction_cooling(record_property):
    k, G = 0.2, 0.1
    n_full = lyapunov_cooling(G, 1.0, k, GAMMA_M, N0_P0).n
    n_pert = perturbative_occupancy(G, 1.0, k, GAMMA_M, N0_P0)
    rel = abs(n_full - n_pert) / n_full

    p = PhysicalParams.p0(kappa=k * W_M)
    power = power_for_coupling(p, G, 1.0)
    deltas = np.linspace(0.3, 2.0, 171)
    ns = [lyapunov_cooling(coupling_from_power(p, D, power), D, k, GAMMA_M, N0_P0).n
          for D in deltas]
    d_min = deltas[int(np.argmin(ns))]
    detail(record_property, f"n = {n_full:.4g} vs perturbative {n_pert:.4g} (rel {rel:.3f}); "
                            f"Delta sweep at {power * 1e3:.3g} mW has its minimum at {d_min:.2f}")
    assert rel < 0.10
    assert abs(d_min - 1.0) <= 0.10


@pytest.mark.criterion(7)
def test_cold_damping(record_property):
    p = PhysicalParams.p0(kappa=5 * W_M)
    d = derive_params(p)
    G = coupling_from_power(p, 0.0, 0.05)
    opt = optimize_feedback(G, 5.0, d.gamma_m, d.n0, {"g_cd": (0.05, 4.0)},
                            fixed={"omega_fb": 3.5}, points=40, thermal_ratio=d.thermal_ratio)
    best = feedback_variances(G, 5.0, d.gamma_m, d.n0, FeedbackConfig(opt.g_cd, 3.5),
                              thermal_ratio=d.thermal_ratio)
    ratio = best.var_q / best.var_p

    asym = []
    for Ga in (0.3, 1.0):
        r = feedback_variances(Ga, 50.0, GAMMA_M, N0_P0, FeedbackConfig(2 * Ga, 3.0), thermal_ratio=X0)
        aq, ap = asymptotic_feedback_variances(Ga, 50.0, GAMMA_M, N0_P0, 2 * Ga, 3.0)
        asym += [abs(aq / r.var_q - 1), abs(ap / r.var_p - 1)]

    n_theta = {th: feedback_variances(G, 5.0, d.gamma_m, d.n0, FeedbackConfig(1.2, 3.5, th * math.pi),
                                      thermal_ratio=d.thermal_ratio).n for th in (0.0, 0.13)}
    detail(record_property, f"optimum g_cd = {opt.g_cd:.3f}, n = {best.n:.3f}, var_q/var_p = {ratio:.3f}; "
                            f"asymptotics within {max(asym):.1%}; n(0.13 pi) = {n_theta[0.13]:.4f} "
                            f"< n(0) = {n_theta[0.0]:.4f}")
    assert not 0.9 <= ratio <= 1.1
    assert max(asym) <= 0.20
    assert n_theta[0.13] < n_theta[0.0]


@pytest.mark.criterion(8)
def test_output_distillation(record_property):
    model = single_mode_model(0.5, 1.0, 1.0, GAMMA_M, N0_P0)
    intra = log_negativity_modes(steady_state_cm(model), 0, 1)
    omegas = np.round(np.linspace(-2, 2, 81), 12)
    peaks = {}
    for kind in ("step", "exponential"):
        en = [log_negativity_modes(output_cm(model, [FilterSpec.from_epsilon(kind, w, 10.0)]), 0, 1)
              for w in omegas]
        peaks[kind] = (omegas[int(np.argmax(en))], max(en))

    tau = 10 * math.pi
    grid = np.round(-1 + 2 * math.pi / tau * np.arange(1, 16), 12)
    side = [sideband_entanglement(model, -1.0, w, tau) for w in grid]
    side_peak = grid[int(np.argmax(side))]
    eps_curve = [sideband_entanglement(model, -1.0, 1.0, e) for e in (math.pi, 10 * math.pi, 100 * math.pi)]
    detail(record_property,
           "mech-output peaks " + ", ".join(f"{k} at {w:+.2f} ({v:.3f})" for k, (w, v) in peaks.items())
           + f" vs intracavity {intra:.4f}; sideband peak at {side_peak:+.2f}; "
           + "eps curve " + " < ".join(f"{v:.4f}" for v in eps_curve))
    for w, v in peaks.values():
        assert abs(w + 1.0) < 1e-9 and v > intra
    assert abs(side_peak - 1.0) < 1e-9
    assert eps_curve[0] < eps_curve[1] < eps_curve[2]


@pytest.mark.criterion(9)
@pytest.mark.xfail(strict=True, reason=(
    "the bound and the n0 >= 1 cutoff are leading order in gamma_m/kappa; the exact "
    "down-conversion steady state is entangled for n0 < 2 kappa/gamma_m with E_N ~ gamma_m/kappa"))
def test_blue_detuned_bound(record_property):
    k, g = 0.1, 1e-4
    Gth = math.sqrt(2 * k * g)
    worst_excess, worst_cut = 0.0, 0.0
    for n0 in (0.0, 0.5, 1.0, 2.0, 10.0, 100.0):
        for frac in np.linspace(0.05, 0.99, 20):
            G = frac * Gth
            m = single_mode_model(G, -1.0, k, g, n0)
            if np.max(np.linalg.eigvals(m.drift).real) >= 0:
                continue
            en = log_negativity_modes(steady_state_cm(m), 0, 1)
            # E_N >= 0, so a negative bound is read as zero
            worst_excess = max(worst_excess, en - max(0.0, en_upper_bound(G, k, g, n0)))
            if n0 >= 1:
                worst_cut = max(worst_cut, en)
    detail(record_property, f"max E_N - bound = {worst_excess:.2e}; max E_N at n0 >= 1 = {worst_cut:.2e}"
                            " (see ledger: exact threshold is n0 = 2 kappa/gamma_m)")
    assert worst_excess <= 0
    assert worst_cut == 0


@pytest.mark.criterion(10)
def test_two_mode_asymmetry(record_property):
    m = two_mode_model(0.326, 0.302, 1.0, -1.0, 1.0, GAMMA_M, N0_P0)
    f = FilterSpec.from_epsilon("exponential", -1.0, 10.0)
    V = two_mode_output_cm(m, f, f)
    ea = log_negativity_modes(V, 0, 1)
    eb = log_negativity_modes(V, 0, 2)
    detail(record_property, f"E_N(mech, B) = {eb:.3f}, E_N(mech, A) = {ea:.3f}, ratio {eb / ea:.2f}")
    assert eb > 2 * ea > 0


@pytest.mark.criterion(11)
def test_hybrid_sharing(record_property):
    deltas = np.round(np.linspace(-2.5, 2.5, 101), 12)
    ema = np.array([log_negativity_modes(steady_state_cm(
        hybrid_model(1.3, 1.0, 1.0, 0.6, Da, 1.0, GAMMA_M, N0_P0)), 0, 2) for Da in deltas])
    d_max = deltas[int(np.argmax(ema))]
    at_plus = ema[int(np.argmin(np.abs(deltas - 1.0)))]
    detail(record_property, f"E_ma maximum {ema.max():.3f} at Delta_a = {d_max:+.2f}; "
                            f"E_ma(+omega_m) = {at_plus:.1e}")
    assert abs(d_max + 1.0) < 0.2
    assert at_plus <= 1e-3 * ema.max()


@pytest.mark.criterion(12)
def test_tripartite_class(record_property):
    model = single_mode_model(0.5, 1.0, 1.0, GAMMA_M, N0_P0)
    tau = 10 * math.pi
    V = output_cm(model, [FilterSpec("step", -1.0, tau), FilterSpec("step", 1.0, tau)])
    rep = tripartite_class(V.entries)
    etas = ", ".join(f"{v:.3f}" for v in rep.eta_minus.values())
    detail(record_property, f"{rep.label}; PT symplectic minima {etas}")
    assert rep.label == "fully tripartite-entangled"
    assert all(rep.npt.values())


SWEEPS = {
    "single": {"system": "single", "fixed_params": {"kappa": 1.0},
               "axis1": {"name": "G", "min": 0.1, "max": 1.6, "count": 8},
               "axis2": {"name": "Delta", "min": -1.0, "max": 1.5, "count": 6},
               "observable": ["E_N(mechanical,opticalA)", "n", "eta", "fidelity"]},
    "output": {"system": "single", "fixed_params": {"kappa": 1.0, "Delta": 1.0, "G": 0.5,
                                                     "Omega1": -1.0, "epsilon": 31.41592653589793},
               "axis1": {"name": "Omega2", "values": [-0.6, 0.2, 1.0]},
               "observable": ["E_N(mechanical,output1)", "E_N(output1,output2)", "tripartite_class"]},
    "two-mode": {"system": "two-mode",
                 "fixed_params": {"kappa": 1.0, "Delta_A": 1.0, "Delta_B": -1.0, "G_A": 0.326,
                                  "Omega_A": -1.0, "Omega_B": -1.0, "epsilon": 10.0},
                 "axis1": {"name": "G_B", "min": 0.1, "max": 0.4, "count": 4},
                 "observable": ["E_N(mechanical,outputA)", "E_N(mechanical,outputB)"]},
    "hybrid": {"system": "hybrid", "fixed_params": {"kappa": 1.0, "gamma_a": 1.0, "G": 1.3,
                                                     "Delta": 1.0},
               "axis1": {"name": "G_a", "min": 0.2, "max": 1.0, "count": 3},
               "axis2": {"name": "Delta_a", "min": -2.0, "max": 2.0, "count": 9},
               "observable": ["E_N(mechanical,atomic)", "tripartite_class"]},
    "feedback": {"system": "feedback", "fixed_params": {"kappa": 5.0, "omega_fb": 3.5},
                 "axis1": {"name": "power", "min": 0.01, "max": 0.05, "count": 3},
                 "axis2": {"name": "g_cd", "values": [0.4, 1.2, 50.0]},
                 "observable": ["n", "var_q", "var_p"]},
}


@pytest.mark.criterion(13)
def test_cli_determinism(record_property, tmp_path, capsys):
    checked = 0
    for name, doc in SWEEPS.items():
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(doc))
        for fmt in ("csv", "json"):
            for threads in ("1", "3"):
                outs = []
                for run in range(2):
                    out = tmp_path / f"{name}_{threads}_{run}.{fmt}"
                    assert main(["sweep", str(cfg), "--out", str(out), "--format", fmt,
                                 "--threads", threads, "--seed", "11"]) == 0
                    outs.append(out.read_bytes())
                assert outs[0] == outs[1], (name, fmt, threads)
                checked += 1
    figs = []
    for run in range(2):
        d = tmp_path / f"fig_{run}"
        assert main(["figure", "fig8", "--out", str(d), "--threads", "2"]) == 0
        figs.append({p: (d / p).read_bytes() for p in sorted(os.listdir(d))})
    capsys.readouterr()
    assert figs[0] == figs[1]
    detail(record_property, f"{checked} sweep reruns and {len(figs[0])} figure files byte-identical")
