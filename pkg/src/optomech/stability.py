"""Stability criteria for the linearized dynamics.

Every closed-form criterion is paired with the eigenvalues of the drift
matrix, which serve as ground truth.  Points on the boundary (``eta <= 0`` or
``s1 <= 0``) count as unstable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OptomechError
from .model import LinearizedModel, single_mode_model


@dataclass(frozen=True)
class StabilityReport:
    s1: float
    s2: float
    eta: float
    max_re_eigenvalue: float
    is_stable: bool
    criterion_agreement: bool


def max_real_eigenvalue(A) -> float:
    """Largest real part of the spectrum of ``A`` (computed in omega_m units)."""
    return float(np.max(np.linalg.eigvals(np.asarray(A, dtype=float)).real))


def routh_hurwitz_single(G, Delta, kappa, gamma_m, omega_m=1.0) -> StabilityReport:
    """Routh-Hurwitz conditions ``s1 > 0``, ``s2 > 0`` for one driven mode.

    ``eta = s2 / (omega_m (kappa^2 + Delta^2))`` is the normalized form of
    the bistability condition.
    """
    wm, k, g = omega_m, kappa, gamma_m
    s1 = 2 * g * k * (
        (k**2 + (wm - Delta) ** 2) * (k**2 + (wm + Delta) ** 2)
        + g * ((g + 2 * k) * (k**2 + Delta**2) + 2 * k * wm**2)
    ) + Delta * wm * G**2 * (g + 2 * k) ** 2
    s2 = wm * (k**2 + Delta**2) - G**2 * Delta
    eta = 1.0 - G**2 * Delta / (wm * (k**2 + Delta**2))
    A = single_mode_model(G, Delta, kappa, gamma_m, 0.0, omega_m=omega_m).drift
    lam = max_real_eigenvalue(A / omega_m) * omega_m
    stable = bool(s1 > 0 and s2 > 0)
    return StabilityReport(s1, s2, eta, lam, stable, stable == (lam < 0))


def stability_parameter(G, Delta, kappa, omega_m=1.0):
    """``eta = 1 - G^2 Delta / (omega_m (kappa^2 + Delta^2))``; vectorized."""
    G, Delta, kappa = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (G, Delta, kappa)))
    return 1.0 - G**2 * Delta / (omega_m * (kappa**2 + Delta**2))


def hurwitz_stable(coeffs) -> bool:
    """Hurwitz test for a monic polynomial given as ``[1, c1, ..., cn]``.

    True iff every leading principal minor of the Hurwitz matrix is positive.
    """
    c = np.asarray(coeffs, dtype=float)
    c = c / c[0]
    n = len(c) - 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * (j + 1) - (i + 1)
            if 0 <= k <= n:
                H[i, j] = c[k]
    return all(np.linalg.det(H[:m, :m]) > 0 for m in range(1, n + 1))


def stability_report(model: LinearizedModel) -> StabilityReport:
    """Stability verdict for any model variant.

    Single-mode models use the closed-form conditions; the 6x6 variants use
    Hurwitz minors of the characteristic polynomial (``s1``/``s2``/``eta``
    are then ``nan``).
    """
    if model.kind == "single":
        return routh_hurwitz_single(model.couplings["G"], model.detunings["Delta"], model.kappa,
                                    model.gamma_m, model.omega_m)
    lam = max_real_eigenvalue(model.drift / model.omega_m) * model.omega_m
    stable = hurwitz_stable(np.poly(model.drift / model.omega_m))
    return StabilityReport(math.nan, math.nan, math.nan, lam, stable, stable == (lam < 0))


def cold_damping_coefficients(G, kappa, gamma_m, g_cd, omega_fb, omega_m=1.0, theta=0.0):
    """Monic quartic ``s^4 + a1 s^3 + a2 s^2 + a3 s + a4`` whose roots are the
    closed-loop poles (``s = -i omega``) of the feedback-modified susceptibility."""
    gc = g_cd * math.cos(theta)
    a1 = gamma_m + kappa + omega_fb
    a2 = omega_m**2 + gamma_m * (kappa + omega_fb) + kappa * omega_fb
    a3 = gamma_m * kappa * omega_fb + omega_m**2 * (kappa + omega_fb) + gc * G * omega_m * omega_fb
    a4 = omega_m**2 * kappa * omega_fb
    return np.array([1.0, a1, a2, a3, a4])


def cold_damping_stability(G, kappa, gamma_m, g_cd, omega_fb, omega_m=1.0, theta=0.0) -> float:
    """The single non-trivial condition ``s_cd > 0`` for derivative high-pass feedback."""
    gm, k, wf, wm = gamma_m, kappa, omega_fb, omega_m
    gG = g_cd * math.cos(theta) * G * wm * wf
    return (gm * k * wf + gG + wm**2 * (k + wf)) * (
        (k + gm) * (k + wf) * (gm + wf) + gm * wm**2 - gG
    ) - k * wm**2 * wf * (k + gm + wf) ** 2


def cold_damping_poles(G, kappa, gamma_m, g_cd, omega_fb, omega_m=1.0, theta=0.0):
    """Poles of the effective susceptibility in the complex frequency plane.

    Stable iff every pole has negative imaginary part.
    """
    s = np.roots(cold_damping_coefficients(G, kappa, gamma_m, g_cd, omega_fb, omega_m, theta))
    return 1j * s


@dataclass(frozen=True)
class CharPoly:
    closed_form: np.ndarray
    numeric: np.ndarray


def two_mode_char_poly(model: LinearizedModel, rtol=1e-9) -> CharPoly:
    """Coefficients ``c1..c6`` of ``det(lambda - A)`` for the two-mode drift matrix.

    Returns both the closed-form coefficients and those computed from the
    matrix; raises if they disagree beyond ``rtol`` (relative to the scale of
    the coefficient's terms).
    """
    if model.kind != "two-mode":
        raise OptomechError("two_mode_char_poly needs a two-mode model")
    wm, g, k = model.omega_m, model.gamma_m, model.kappa
    GA, GB = model.couplings["G_A"], model.couplings["G_B"]
    DA, DB = model.detunings["Delta_A"], model.detunings["Delta_B"]
    a = DA**2 + k**2
    b = DB**2 + k**2
    drive = GA**2 * DA + GB**2 * DB
    c1 = g + 4 * k
    c2 = DA**2 + DB**2 + 4 * g * k + 6 * k**2 + wm**2
    c3 = g * (DA**2 + DB**2 + 6 * k**2) + 2 * k * (DA**2 + DB**2 + 2 * (k**2 + wm**2))
    c4 = (k**4 + 2 * g * k * (DB**2 + 2 * k**2) + 6 * k**2 * wm**2 + DB**2 * (k**2 + wm**2)
          + DA**2 * (DB**2 + 2 * g * k + k**2 + wm**2) - wm * drive)
    c5 = g * a * b + 2 * k * wm**2 * (DA**2 + DB**2 + 2 * k**2) - 2 * k * wm * drive
    c6 = wm**2 * a * b - wm * (GB**2 * DB * a + GA**2 * DA * b)
    closed = np.array([c1, c2, c3, c4, c5, c6])
    numeric = np.real(np.poly(model.drift))[1:]
    scale = np.array([
        abs(g) + 4 * k,
        c2,
        c3,
        c4 + 2 * abs(wm * drive) + wm * (GA**2 * abs(DA) + GB**2 * abs(DB)),
        g * a * b + 2 * k * wm**2 * (DA**2 + DB**2 + 2 * k**2)
        + 2 * k * wm * (GA**2 * abs(DA) + GB**2 * abs(DB)),
        wm**2 * a * b + wm * (GB**2 * abs(DB) * a + GA**2 * abs(DA) * b),
    ])
    err = np.abs(closed - numeric) / np.maximum(scale, 1e-300)
    if np.any(err > rtol):
        raise OptomechError(f"closed-form characteristic polynomial mismatch: {err.max():.3e}")
    return CharPoly(closed, numeric)


@dataclass(frozen=True)
class BalanceCheck:
    balanced: bool
    eigenvalue_drift: float


def _matched_drift(lam_a, lam_b):
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(lam_a[:, None] - lam_b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def balanced_condition_check(model: LinearizedModel, tol=1e-12) -> BalanceCheck:
    """Whether ``|G_A| = |G_B|`` and ``Delta_A = -Delta_B``, plus a numeric witness.

    The witness is the largest shift of any eigenvalue of ``A`` relative to
    the uncoupled (``G_A = G_B = 0``) matrix, after optimal pairing.
    """
    GA, GB = model.couplings["G_A"], model.couplings["G_B"]
    DA, DB = model.detunings["Delta_A"], model.detunings["Delta_B"]
    scale = max(abs(GA), abs(GB), abs(DA), abs(DB), 1e-300)
    balanced = abs(abs(GA) - abs(GB)) <= tol * scale and abs(DA + DB) <= tol * scale
    A0 = np.array(model.drift)
    A0[1, 2] = A0[1, 4] = A0[3, 0] = A0[5, 0] = 0.0
    drift = _matched_drift(eigvals_extended(model.drift), eigvals_extended(A0))
    return BalanceCheck(bool(balanced), drift)


def eigvals_extended(A, dps=40) -> np.ndarray:
    """Eigenvalues computed with ``dps`` decimal digits.

    Degenerate, possibly defective spectra (the balanced two-mode case) lose
    half their digits in double precision; extended precision keeps the
    error far below 1e-10.
    """
    import mpmath

    with mpmath.workdps(dps):
        ev = mpmath.eig(mpmath.matrix(np.asarray(A, dtype=float).tolist()), left=False, right=False)
        return np.array([complex(z) for z in ev])
