"""Ground-state cooling: dynamical back-action and cold-damping feedback.

Back-action cooling has closed forms in the high-Q limit.  Cold damping is
evaluated by integrating the feedback-modified position spectrum over
frequency.  The detected quadrature may be rotated by a phase ``theta``
(``theta = 0`` is the phase quadrature).  All rates are in units of
``omega_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, InstabilityError, OptomechError, PhysicalityError, ValidationError
from .model import bose_occupation, single_mode_model, thermal_ratio_from_n0
from .stability import cold_damping_poles, cold_damping_stability, routh_hurwitz_single

QUANTUM_SLACK = 1e-9


@dataclass(frozen=True)
class FeedbackConfig:
    """Derivative high-pass feedback ``g(w) = -i w g_cd / (1 - i w / omega_fb)``."""

    g_cd: float
    omega_fb: float
    theta: float = 0.0
    filter_kind: str = "derivative-high-pass"

    def __post_init__(self):
        if not self.omega_fb > 0:
            raise ValidationError("omega_fb", f"must be positive, got {self.omega_fb!r}")
        if not (np.isfinite(self.g_cd) and self.g_cd >= 0):
            raise ValidationError("g_cd", f"must be a finite non-negative gain, got {self.g_cd!r}")
        if self.filter_kind != "derivative-high-pass":
            raise ValidationError("filter_kind", f"unsupported filter {self.filter_kind!r}")

    def transform(self, omega):
        w = np.asarray(omega, dtype=float)
        return -1j * w * self.g_cd / (1 - 1j * w / self.omega_fb)


@dataclass(frozen=True)
class CoolingReport:
    var_q: float
    var_p: float
    n: float
    Gamma: float
    A_plus: float
    A_minus: float
    gamma_eff: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("var_q", "var_p"):
            v = getattr(self, name)
            if v < 0.5 - QUANTUM_SLACK:
                raise PhysicalityError(f"{name} = {v:.12g} is below the vacuum level")

    @property
    def equipartition_ratio(self) -> float:
        return self.var_q / self.var_p


def _report(var_q, var_p, Gamma, A_plus, A_minus, gamma_eff, **extra) -> CoolingReport:
    return CoolingReport(var_q, var_p, 0.5 * (var_q + var_p - 1.0), Gamma, A_plus, A_minus,
                         gamma_eff, extra)


# --------------------------------------------------------------------------
# back-action
# --------------------------------------------------------------------------

def sideband_rates(G, kappa, Delta, omega_m=1.0):
    """Stokes and anti-Stokes scattering rates ``(A_plus, A_minus)``."""
    if not kappa > 0:
        raise ValidationError("kappa", "must be positive")
    a_plus = G**2 * kappa / (2 * (kappa**2 + (Delta + omega_m) ** 2))
    a_minus = G**2 * kappa / (2 * (kappa**2 + (Delta - omega_m) ** 2))
    return a_plus, a_minus


def cooling_rate(G, kappa, Delta, omega_m=1.0):
    """Net optical damping ``Gamma = A_minus - A_plus`` in closed form."""
    return 2 * G**2 * Delta * omega_m * kappa / (
        (kappa**2 + (omega_m - Delta) ** 2) * (kappa**2 + (omega_m + Delta) ** 2)
    )


def backaction_variances(G, Delta, kappa, gamma_m, n0, omega_m=1.0) -> CoolingReport:
    """High-Q closed forms for the mechanical variances under a detuned drive.

    The thermal drive enters as ``gamma_m (n0 + 1/2)``, the symmetrized bath
    occupancy, so the uncoupled limit is the thermal state ``n0 + 1/2``.
    """
    rep = routh_hurwitz_single(G, Delta, kappa, gamma_m, omega_m)
    if not rep.is_stable:
        raise InstabilityError("back-action operating point is unstable", rep)
    a_plus, a_minus = sideband_rates(G, kappa, Delta, omega_m)
    Gamma = cooling_rate(G, kappa, Delta, omega_m)
    eta = rep.eta
    nth = n0 + 0.5
    a = (kappa**2 + Delta**2 + eta * omega_m**2) / (eta * (kappa**2 + Delta**2 + omega_m**2))
    b = (2 * (Delta**2 - kappa**2) - omega_m**2) / (kappa**2 + Delta**2)
    half_sum = 0.5 * (a_plus + a_minus)
    denom = gamma_m + Gamma
    var_p = (half_sum + gamma_m * nth * (1 + Gamma / (2 * kappa))) / denom
    var_q = (a * half_sum + gamma_m * nth / eta * (1 + Gamma * b / (2 * kappa))) / denom
    return _report(var_q, var_p, Gamma, a_plus, a_minus, gamma_m + Gamma, eta=eta, a=a, b=b)


def perturbative_occupancy(G, Delta, kappa, gamma_m, n0, omega_m=1.0) -> float:
    """``n ~ (gamma_m n0 + A_plus) / (gamma_m + Gamma)`` for weak coupling."""
    a_plus, _ = sideband_rates(G, kappa, Delta, omega_m)
    return (gamma_m * n0 + a_plus) / (gamma_m + cooling_rate(G, kappa, Delta, omega_m))


def lyapunov_cooling(G, Delta, kappa, gamma_m, n0, omega_m=1.0) -> CoolingReport:
    """Exact (linearized) variances from the steady-state covariance matrix."""
    from .lyapunov import steady_state_cm

    V = steady_state_cm(single_mode_model(G, Delta, kappa, gamma_m, n0, omega_m=omega_m))
    a_plus, a_minus = sideband_rates(G, kappa, Delta, omega_m)
    Gamma = cooling_rate(G, kappa, Delta, omega_m)
    return _report(V.entries[0, 0], V.entries[1, 1], Gamma, a_plus, a_minus, gamma_m + Gamma,
                   cm=V)


# --------------------------------------------------------------------------
# cold damping
# --------------------------------------------------------------------------

def _inverse_susceptibility(omega, G, kappa, gamma_m, fb: FeedbackConfig, omega_m=1.0):
    w = np.asarray(omega, dtype=float)
    g = fb.transform(w) * math.cos(fb.theta)
    return (omega_m**2 - w**2 - 1j * w * gamma_m + g * G * omega_m / (kappa - 1j * w)) / omega_m


def _check_poles(G, kappa, gamma_m, fb, omega_m, tol=1e-12):
    poles = cold_damping_poles(G, kappa, gamma_m, fb.g_cd, fb.omega_fb, omega_m, fb.theta)
    top = float(np.max(poles.imag))
    if top >= -tol * max(1.0, float(np.max(np.abs(poles)))):
        raise InstabilityError(f"feedback loop has a pole at Im(w) = {top:.3e} >= 0")
    return poles


def effective_susceptibility(omega, G, kappa, gamma_m, fb: FeedbackConfig, omega_m=1.0):
    """Mechanical susceptibility modified by the feedback loop (Delta = 0)."""
    _check_poles(G, kappa, gamma_m, fb, omega_m)
    return 1.0 / _inverse_susceptibility(omega, G, kappa, gamma_m, fb, omega_m)


def effective_damping_cd(omega, G, kappa, gamma_m, fb: FeedbackConfig, omega_m=1.0):
    """Frequency-dependent damping rate added by the feedback loop."""
    w = np.asarray(omega, dtype=float)
    wf = fb.omega_fb
    gain = fb.g_cd * math.cos(fb.theta)
    return gamma_m + gain * G * omega_m * wf * (kappa * wf - w**2) / ((kappa**2 + w**2) * (wf**2 + w**2))


def scaled_gain(G, kappa, gamma_m, g_cd, omega_m=1.0) -> float:
    """``g2 = g_cd G omega_m / (kappa gamma_m)``."""
    return g_cd * G * omega_m / (kappa * gamma_m)


def scaled_power(G, kappa, gamma_m) -> float:
    """``zeta = 2 G^2 / (kappa gamma_m)``."""
    return 2 * G**2 / (kappa * gamma_m)


def thermal_spectrum(omega, gamma_m, thermal_ratio, omega_m=1.0, thermal_kind="exact"):
    """Symmetrized Brownian-force spectrum.

    ``exact`` is ``(gamma_m w / w_m) coth(x w / 2 w_m)`` with
    ``x = hbar w_m / k_B T0``; ``markov`` replaces it by its value at
    ``w = w_m``, ``gamma_m (2 n0 + 1)``.
    """
    w = np.asarray(omega, dtype=float)
    if thermal_kind == "markov":
        return np.full_like(w, gamma_m * (2 * bose_occupation(thermal_ratio) + 1))
    if thermal_kind != "exact":
        raise ValidationError("thermal_kind", f"expected 'markov' or 'exact', got {thermal_kind!r}")
    if math.isinf(thermal_ratio):
        return gamma_m * np.abs(w) / omega_m
    y = 0.5 * thermal_ratio * w / omega_m
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gamma_m * (w / omega_m) / np.tanh(y)
    return np.where(np.abs(y) < 1e-300, 2 * gamma_m / thermal_ratio, out)


def feedback_spectra(omega, G, kappa, gamma_m, thermal_ratio, fb: FeedbackConfig, omega_m=1.0,
                     thermal_kind="exact"):
    """``(S_th, S_rp, S_fb)`` for a detected quadrature rotated by ``fb.theta``."""
    w = np.asarray(omega, dtype=float)
    g = fb.transform(w)
    s, c = math.sin(fb.theta), math.cos(fb.theta)
    S_th = thermal_spectrum(w, gamma_m, thermal_ratio, omega_m, thermal_kind)
    S_rp = kappa / (kappa**2 + w**2) * np.abs(G - g * s * (kappa + 1j * w) / (2 * kappa)) ** 2
    S_fb = np.abs(g) ** 2 / (4 * kappa) * c**2
    return S_th, S_rp, S_fb


def _breakpoints(poles, cutoff):
    pts = {0.0, 1.0}
    for p in poles:
        x, width = abs(p.real), abs(p.imag)
        for k in (0.0, 1.0, 10.0, 100.0):
            for sgn in (-1.0, 1.0):
                y = x + sgn * k * width
                if 0 < y < cutoff:
                    pts.add(y)
    return np.array(sorted(pts | {cutoff}))


def feedback_variances(G, kappa, gamma_m, n0, fb: FeedbackConfig, omega_m=1.0, *,
                       thermal_ratio=None, thermal_kind="exact", rtol=1e-8) -> CoolingReport:
    """Mechanical variances under cold damping from the frequency integrals.

    The integrand is even in ``w``, so only ``w >= 0`` is integrated.  The
    range ``[0, 1e3 max(w_m, kappa, omega_fb)]`` is split at the loop
    resonances and a ``1/w^2`` tail is added beyond the cutoff.
    """
    if thermal_ratio is None:
        thermal_ratio = thermal_ratio_from_n0(n0)
    s_cd = cold_damping_stability(G, kappa, gamma_m, fb.g_cd * math.cos(fb.theta), fb.omega_fb,
                                  omega_m)
    if not s_cd > 0:
        raise InstabilityError(f"cold-damping loop is unstable (s_cd = {s_cd:.3e})")
    poles = _check_poles(G, kappa, gamma_m, fb, omega_m)
    cutoff = 1e3 * max(omega_m, kappa, fb.omega_fb)

    def spectrum(w):
        chi = 1.0 / _inverse_susceptibility(w, G, kappa, gamma_m, fb, omega_m)
        S = sum(feedback_spectra(w, G, kappa, gamma_m, thermal_ratio, fb, omega_m, thermal_kind))
        return float(np.abs(chi) ** 2 * S)

    edges = _breakpoints(poles, cutoff)
    results = []
    for weight in (lambda w: 1.0, lambda w: (w / omega_m) ** 2):
        total, err = 0.0, 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(lambda w: weight(w) * spectrum(w), lo, hi,
                                    epsabs=0.0, epsrel=rtol * 1e-2, limit=400)
            total += val
            err += e
        tail_coeff = weight(cutoff) * spectrum(cutoff) * cutoff**2
        total += tail_coeff / cutoff
        if err > rtol * abs(total):
            raise ConvergenceError(f"spectral integral reached only {err / abs(total):.2e}", err)
        results.append(total / math.pi)
    var_q, var_p = results
    gamma_eff = float(effective_damping_cd(omega_m, G, kappa, gamma_m, fb, omega_m))
    return _report(var_q, var_p, 0.0, *sideband_rates(G, kappa, 0.0, omega_m), gamma_eff,
                   s_cd=s_cd)


def asymptotic_feedback_variances(G, kappa, gamma_m, n0, g_cd, omega_fb, omega_m=1.0):
    """Bad-cavity (``kappa >> omega_fb ~ omega_m >> gamma_m``) approximations.

    Returns ``(var_q, var_p)``.
    """
    g2 = scaled_gain(G, kappa, gamma_m, g_cd, omega_m)
    zeta = scaled_power(G, kappa, gamma_m)
    r = omega_m**2 / omega_fb**2
    shot = g2**2 / (4 * zeta)
    thermal = n0 + 0.5 + zeta / 4
    var_q = (shot + thermal * (1 + r)) / (1 + g2 + omega_fb**2 / omega_m**2)
    var_p = (shot * (1 + g2 * gamma_m * omega_fb / omega_m**2)
             + thermal * (1 + r + g2 * gamma_m / omega_fb)) / (1 + g2 + r)
    return var_q, var_p


@dataclass(frozen=True)
class FeedbackOptimum:
    g_cd: float
    omega_fb: float
    theta: float
    n: float
    axes: dict
    landscape: np.ndarray


def _n_or_inf(G, kappa, gamma_m, n0, fb, thermal_ratio, thermal_kind):
    try:
        return feedback_variances(G, kappa, gamma_m, n0, fb, thermal_ratio=thermal_ratio,
                                  thermal_kind=thermal_kind).n
    except (InstabilityError, ConvergenceError, PhysicalityError):
        return math.inf


def optimize_feedback(G, kappa, gamma_m, n0, search_space: dict, *, fixed=None, points=32,
                      thermal_ratio=None, thermal_kind="exact", executor=None) -> FeedbackOptimum:
    """Minimize the occupancy over the feedback parameters.

    ``search_space`` maps any of ``g_cd``, ``omega_fb``, ``theta`` to a
    ``(lo, hi)`` range; the others are taken from ``fixed``.  A coarse grid
    (``points`` per axis) is followed by a bounded scalar refinement of
    each free axis in turn, between the neighbours of the best grid point.  Unstable points count as
    ``n = inf``; ties go to the smaller ``g_cd``.
    """
    names = ("g_cd", "omega_fb", "theta")
    fixed = dict(fixed or {})
    free = [k for k in names if k in search_space]
    unknown = set(search_space) - set(names)
    if unknown:
        raise ValidationError(sorted(unknown)[0], "not a feedback parameter")
    for k in names:
        if k not in free and k not in fixed:
            if k == "theta":
                fixed[k] = 0.0
            else:
                raise ValidationError(k, "needs either a search range or a fixed value")
    axes = {}
    for k in free:
        lo, hi = search_space[k]
        if not lo < hi:
            raise ValidationError(k, "search range must have lo < hi")
        axes[k] = np.linspace(lo, hi, points)

    def n_at(vals):
        kw = dict(fixed)
        kw.update(vals)
        return _n_or_inf(G, kappa, gamma_m, n0, FeedbackConfig(kw["g_cd"], kw["omega_fb"], kw["theta"]),
                         thermal_ratio, thermal_kind)

    grid = list(np.ndindex(*[points] * len(free)))
    jobs = [{k: axes[k][i] for k, i in zip(free, idx)} for idx in grid]
    values = list(executor.map(n_at, jobs)) if executor is not None else [n_at(j) for j in jobs]
    land = np.array(values).reshape([points] * len(free)) if free else np.array(values)
    finite = np.isfinite(land)
    if not finite.any():
        raise OptomechError("no stable feedback configuration in the search space")
    # deterministic tie-break: lowest n, then smallest g_cd (C-order keeps g_cd outermost)
    best_idx = np.unravel_index(int(np.argmin(np.where(finite, land, np.inf))), land.shape)
    best = {k: axes[k][i] for k, i in zip(free, best_idx)}
    best_n = float(land[best_idx])
    for k, i in zip(free, best_idx):
        ax = axes[k]
        lo, hi = ax[max(i - 1, 0)], ax[min(i + 1, points - 1)]
        if hi <= lo:
            continue

        def f(x, k=k):
            trial = dict(best)
            trial[k] = x
            return n_at(trial)

        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-6 * max(1.0, abs(hi - lo))})
        if np.isfinite(res.fun) and res.fun < best_n:
            best[k] = float(res.x)
            best_n = float(res.fun)
    out = dict(fixed)
    out.update(best)
    return FeedbackOptimum(float(out["g_cd"]), float(out["omega_fb"]), float(out["theta"]), best_n,
                           axes, land)
