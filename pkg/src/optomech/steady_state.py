"""Semiclassical operating points of the driven cavity.

The intracavity intensity ``I = |alpha_s|^2`` obeys
``I (kappa^2 + (Delta0 - G0^2 I)^2) = E^2`` (units of omega_m), a real cubic
with one or three positive roots.  Three roots mean bistability; the middle
branch is always the unstable one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, ValidationError
from .model import DerivedParams

DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class OperatingPoint:
    """One branch of the semiclassical steady state.

    For two driven modes ``alpha_s``, ``effective_Delta`` and ``effective_G``
    are ``(A, B)`` pairs.  ``q_s`` is the dimensionless mirror displacement.
    """

    alpha_s: complex | tuple
    q_s: float
    effective_Delta: float | tuple
    effective_G: float | tuple
    branch_index: int
    stable_hint: bool
    residual: float = 0.0
    degenerate: bool = False

    @property
    def beta_s(self):
        if isinstance(self.alpha_s, tuple):
            return self.alpha_s[1]
        return None


def _cubic_real_roots(a, b, c, d):
    """Real roots of ``a x^3 + b x^2 + c x + d`` in closed form.

    Returns ``(roots, degenerate)`` with roots ascending.  A double root is
    reported once, with ``degenerate=True``.
    """
    # depressed cubic t^3 + p t + q with x = t - b/3a
    b, c, d = b / a, c / a, d / a
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(abs(q / 2.0) ** 2, abs(p / 3.0) ** 3, 1e-300)
    rel = disc / scale
    if abs(rel) <= DEGENERATE_TOL and p != 0.0:
        # double root: t1 = 3q/p (simple), t2 = -3q/2p (double)
        t_simple = 3.0 * q / p
        t_double = -1.5 * q / p
        roots = sorted({t_simple - shift, t_double - shift})
        return np.array(roots), True
    if disc > 0:
        sq = math.sqrt(disc)
        u = np.cbrt(-q / 2.0 + sq)
        v = np.cbrt(-q / 2.0 - sq)
        return np.array([u + v - shift]), False
    if p == 0.0:
        return np.array([np.cbrt(-q) - shift]), False
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * r)
    phi = math.acos(max(-1.0, min(1.0, arg)))
    ts = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    return np.sort(np.array(ts) - shift), False


def _polish(coeffs, x, iters=8):
    poly = np.poly1d(coeffs)
    dpoly = poly.deriv()
    for _ in range(iters):
        dp = dpoly(x)
        if dp == 0:
            break
        step = poly(x) / dp
        x = x - step
        if abs(step) <= 1e-16 * max(abs(x), 1e-300):
            break
    return x


def intensity_branches(g0, E, Delta0, kappa):
    """Real non-negative solutions ``I`` of the single-mode fixed point.

    Returns ``(intensities, degenerate)``.
    """
    if E == 0:
        return np.array([0.0]), False
    if g0 == 0:
        return np.array([E**2 / (kappa**2 + Delta0**2)]), False
    coeffs = [g0**4, -2.0 * Delta0 * g0**2, kappa**2 + Delta0**2, -(E**2)]
    roots, degenerate = _cubic_real_roots(*coeffs)
    roots = np.array([_polish(coeffs, r) for r in roots])
    roots = roots[roots >= 0]
    return np.sort(roots), degenerate


def single_mode_point(g0, E, Delta0, kappa, I, branch_index=0, degenerate=False):
    Delta = Delta0 - g0**2 * I
    alpha = E / complex(kappa, Delta) if E != 0 else 0j
    G = math.sqrt(2.0) * g0 * abs(alpha)
    lhs = I * (kappa**2 + Delta**2)
    residual = abs(lhs - E**2) / E**2 if E != 0 else abs(I)
    s2 = kappa**2 + Delta**2 - G**2 * Delta
    return OperatingPoint(
        alpha_s=alpha,
        q_s=g0 * abs(alpha) ** 2,
        effective_Delta=Delta,
        effective_G=G,
        branch_index=branch_index,
        stable_hint=bool(s2 > 0),
        residual=residual,
        degenerate=degenerate,
    )


def solve_single_mode(d: DerivedParams) -> list:
    """All semiclassical branches for one driven mode, sorted by intensity.

    ``stable_hint`` reflects the bistability condition only; use
    :func:`optomech.stability.routh_hurwitz_single` for the full verdict.
    """
    intensities, degenerate = intensity_branches(d.G0, d.E_drive, d.Delta0, d.kappa)
    return [
        single_mode_point(d.G0, d.E_drive, d.Delta0, d.kappa, I, k, degenerate)
        for k, I in enumerate(intensities)
    ]


def select_branch(points: list, which: str | int = "lowest-stable") -> OperatingPoint:
    """Pick a branch: an index, ``"lowest"``, ``"highest"`` or ``"lowest-stable"``."""
    if isinstance(which, int):
        return points[which]
    if which == "lowest":
        return points[0]
    if which == "highest":
        return points[-1]
    if which == "lowest-stable":
        for pt in points:
            if pt.stable_hint:
                return pt
        return points[0]
    raise ValidationError("branch", f"unknown branch selector {which!r}")


def _two_mode_residual(q, g0A, g0B, EA, EB, D0A, D0B, kappa):
    IA = EA**2 / (kappa**2 + (D0A - g0A * q) ** 2)
    IB = EB**2 / (kappa**2 + (D0B - g0B * q) ** 2)
    return g0A * IA + g0B * IB - q


def two_mode_fixed_points(g0A, g0B, EA, EB, Delta0A, Delta0B, kappa, *, n_start=32,
                          refine=64, dedup_tol=1e-8, maxiter=500):
    """Displacements ``q_s`` solving the coupled two-drive fixed point.

    The residual ``F(q) - q`` is scanned on ``n_start * refine`` points of
    ``[0, q_max]`` (``q_max`` bounds any physical displacement) and every sign
    change is bracketed and solved with Brent's method.
    """
    args = (g0A, g0B, EA, EB, Delta0A, Delta0B, kappa)
    q_max = (g0A * EA**2 + g0B * EB**2) / kappa**2
    if q_max == 0:
        return np.array([0.0])
    grid = np.linspace(0.0, q_max * 1.000001, n_start * refine + 1)
    h = _two_mode_residual(grid, *args)
    roots = []
    for k in range(len(grid) - 1):
        if h[k] == 0:
            roots.append(grid[k])
        elif h[k] * h[k + 1] < 0:
            try:
                r = brentq(_two_mode_residual, grid[k], grid[k + 1], args=args,
                           xtol=1e-15 * q_max, rtol=4 * np.finfo(float).eps, maxiter=maxiter)
            except RuntimeError as exc:  # pragma: no cover - brentq on a valid bracket
                res = _two_mode_residual(grid[k], *args)
                raise ConvergenceError(f"two-mode fixed point did not converge: {exc}", res)
            roots.append(r)
    roots = np.sort(np.array(roots))
    out = []
    for r in roots:
        if not out or abs(r - out[-1]) > dedup_tol * max(1.0, abs(r)):
            out.append(r)
    if not out:
        raise ConvergenceError("no two-mode fixed point found", float(np.min(np.abs(h))))
    return np.array(out)


def solve_two_mode(d_pair) -> list:
    """Operating points for two driven modes sharing one mechanical resonator.

    ``d_pair`` is ``(dA, dB)``; mechanics and ``kappa`` must agree.  The
    effective detunings are ``Delta_x = Delta0_x - G0_x q_s``.
    """
    dA, dB = d_pair
    if not math.isclose(dA.kappa, dB.kappa, rel_tol=1e-12):
        raise ValidationError("kappa", "both cavity modes must share the same decay rate")
    if not math.isclose(dA.gamma_m, dB.gamma_m, rel_tol=1e-12):
        raise ValidationError("quality_Q", "both modes must couple to the same resonator")
    kappa = dA.kappa
    qs = two_mode_fixed_points(dA.G0, dB.G0, dA.E_drive, dB.E_drive, dA.Delta0, dB.Delta0,
                               kappa)
    points = []
    for k, q in enumerate(qs):
        DA = dA.Delta0 - dA.G0 * q
        DB = dB.Delta0 - dB.G0 * q
        a = dA.E_drive / complex(kappa, DA)
        b = dB.E_drive / complex(kappa, DB)
        GA = math.sqrt(2.0) * dA.G0 * abs(a)
        GB = math.sqrt(2.0) * dB.G0 * abs(b)
        q_check = dA.G0 * abs(a) ** 2 + dB.G0 * abs(b) ** 2
        residual = abs(q_check - q) / max(abs(q), 1e-300) if q != 0 else abs(q_check)
        points.append(
            OperatingPoint(
                alpha_s=(a, b),
                q_s=q_check,
                effective_Delta=(DA, DB),
                effective_G=(GA, GB),
                branch_index=k,
                stable_hint=_two_mode_stable(GA, GB, DA, DB, kappa, dA.gamma_m),
                residual=residual,
            )
        )
    return points


def _two_mode_stable(GA, GB, DA, DB, kappa, gamma_m):
    from .model import two_mode_model

    model = two_mode_model(GA, GB, DA, DB, kappa, gamma_m, 0.0)
    return bool(np.max(np.linalg.eigvals(model.drift).real) < 0)


def drives_for_target(g0A, g0B, kappa, G_A, G_B, Delta_A, Delta_B):
    """Invert the two-mode fixed point: drives and bare detunings giving target couplings.

    Returns ``(E_A, E_B, Delta0_A, Delta0_B)`` in units of omega_m.
    """
    IA = G_A**2 / (2.0 * g0A**2)
    IB = G_B**2 / (2.0 * g0B**2)
    q = g0A * IA + g0B * IB
    return (
        math.sqrt(IA * (kappa**2 + Delta_A**2)),
        math.sqrt(IB * (kappa**2 + Delta_B**2)),
        Delta_A + g0A * q,
        Delta_B + g0B * q,
    )


@dataclass(frozen=True)
class WeakCouplingReport:
    excitation_ratio: float
    inverse_intensity: float
    passed: bool


def atom_weak_coupling_check(g, Delta_a, gamma_a, alpha_s, *, max_excitation=0.1,
                             max_inverse_intensity=0.1) -> WeakCouplingReport:
    """Validity of the bosonized-atom and linearization approximations.

    ``excitation_ratio`` is the single-atom excitation probability
    ``g^2 |alpha_s|^2 / (Delta_a^2 + gamma_a^2)``; ``inverse_intensity`` is
    ``1/|alpha_s|^2``.  Both must be small.
    """
    I = abs(alpha_s) ** 2
    r1 = g**2 * I / (Delta_a**2 + gamma_a**2)
    r2 = math.inf if I == 0 else 1.0 / I
    return WeakCouplingReport(r1, r2, bool(r1 < max_excitation and r2 < max_inverse_intensity))
