"""Physical parameters, derived rates and linearized drift/diffusion matrices.

Everything downstream of :class:`PhysicalParams` works in units of the
mechanical angular frequency: rates are divided by ``omega_m`` and times are
multiplied by it.  The SI conversion happens once, in :func:`derive_params`.

Quadrature ordering is ``(dq, dp)`` for the mechanical mode followed by
``(dX, dY)`` for every optical or atomic mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants

from .errors import ValidationError

HBAR = constants.hbar
K_B = constants.k
C_LIGHT = constants.c


@dataclass(frozen=True)
class PhysicalParams:
    """SI description of a driven single-mode optomechanical cavity.

    Exactly one of ``finesse_F`` and ``kappa`` must be given.  ``kappa`` is the
    cavity amplitude decay rate in rad/s; ``detuning_Delta0`` is the bare
    detuning ``omega_c - omega_l`` in rad/s.
    """

    omega_m: float
    quality_Q: float
    mass: float
    cavity_length_L: float
    wavelength: float
    bath_temp_T0: float
    finesse_F: float | None = None
    kappa: float | None = None
    drive_power_P: float = 0.0
    detuning_Delta0: float = 0.0

    def __post_init__(self):
        for name in ("omega_m", "quality_Q", "mass", "cavity_length_L", "wavelength"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be positive and finite, got {value!r}")
        if not (np.isfinite(self.bath_temp_T0) and self.bath_temp_T0 >= 0):
            raise ValidationError("bath_temp_T0", f"must be >= 0, got {self.bath_temp_T0!r}")
        if not (np.isfinite(self.drive_power_P) and self.drive_power_P >= 0):
            raise ValidationError("drive_power_P", f"must be >= 0, got {self.drive_power_P!r}")
        if not np.isfinite(self.detuning_Delta0):
            raise ValidationError("detuning_Delta0", "must be finite")
        if (self.finesse_F is None) == (self.kappa is None):
            raise ValidationError("kappa", "give exactly one of finesse_F and kappa")
        if self.finesse_F is not None and not self.finesse_F > 0:
            raise ValidationError("finesse_F", f"must be positive, got {self.finesse_F!r}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValidationError("kappa", f"must be positive, got {self.kappa!r}")

    @classmethod
    def p0(cls, **overrides) -> "PhysicalParams":
        """The reference parameter set used throughout (10 MHz, 30 ng, 0.5 mm, 1064 nm, 0.6 K).

        Defaults to a finesse of 8e4.  Pass ``kappa=...`` to set the decay rate
        directly; the finesse is then dropped.
        """
        base = dict(
            omega_m=2 * math.pi * 10e6,
            quality_Q=1e5,
            mass=30e-12,
            cavity_length_L=0.5e-3,
            wavelength=1064e-9,
            bath_temp_T0=0.6,
            finesse_F=8e4,
        )
        if "kappa" in overrides and "finesse_F" not in overrides:
            base["finesse_F"] = None
        base.update(overrides)
        return cls(**base)

    def with_kappa_ratio(self, ratio: float) -> "PhysicalParams":
        """Copy with ``kappa = ratio * omega_m`` (finesse dropped)."""
        return replace(self, finesse_F=None, kappa=ratio * self.omega_m)

    @property
    def omega_c(self) -> float:
        return 2 * math.pi * C_LIGHT / self.wavelength

    @property
    def kappa_si(self) -> float:
        if self.kappa is not None:
            return float(self.kappa)
        return math.pi * C_LIGHT / (self.cavity_length_L * self.finesse_F)


@dataclass(frozen=True)
class DerivedParams:
    """Rates derived from :class:`PhysicalParams`, in units of ``omega_m``.

    ``thermal_ratio`` is hbar*omega_m/(k_B*T0) (``inf`` at zero temperature).
    ``omega_m_si`` keeps the conversion factor back to rad/s.
    """

    gamma_m: float
    G0: float
    E_drive: float
    n0: float
    kappa: float
    Delta0: float
    thermal_ratio: float
    omega_m_si: float

    def to_si(self, rate: float) -> float:
        return rate * self.omega_m_si


def bose_occupation(thermal_ratio: float) -> float:
    """Mean occupation 1/(exp(x)-1); zero for ``x = inf``."""
    if math.isinf(thermal_ratio):
        return 0.0
    return 1.0 / math.expm1(thermal_ratio)


def thermal_ratio_from_n0(n0: float) -> float:
    """Inverse of :func:`bose_occupation`."""
    if n0 <= 0:
        return math.inf
    return math.log1p(1.0 / n0)


def derive_params(p: PhysicalParams) -> DerivedParams:
    wm = p.omega_m
    kappa = p.kappa_si
    omega_c = p.omega_c
    omega_l = omega_c - p.detuning_Delta0
    if omega_l <= 0:
        raise ValidationError("detuning_Delta0", "laser frequency must stay positive")
    G0 = (omega_c / p.cavity_length_L) * math.sqrt(HBAR / (p.mass * wm))
    E = math.sqrt(2 * p.drive_power_P * kappa / (HBAR * omega_l))
    if p.bath_temp_T0 == 0:
        ratio = math.inf
    else:
        ratio = HBAR * wm / (K_B * p.bath_temp_T0)
    return DerivedParams(
        gamma_m=1.0 / p.quality_Q,
        G0=G0 / wm,
        E_drive=E / wm,
        n0=bose_occupation(ratio),
        kappa=kappa / wm,
        Delta0=p.detuning_Delta0 / wm,
        thermal_ratio=ratio,
        omega_m_si=wm,
    )


def effective_coupling(d: DerivedParams, alpha_s: complex) -> float:
    """Linearized coupling ``G = sqrt(2) G0 |alpha_s|`` (units of omega_m)."""
    return math.sqrt(2.0) * d.G0 * abs(alpha_s)


def coupling_from_power(p: PhysicalParams, Delta: float, power: float | None = None) -> float:
    """Closed-form effective coupling at effective detuning ``Delta`` (units of omega_m).

    Evaluates ``(2 omega_c/L) sqrt(P kappa / (m omega_m omega_l (kappa^2 + Delta^2)))``
    with ``omega_l = omega_c``.  ``power`` overrides ``p.drive_power_P`` (watts).
    """
    P = p.drive_power_P if power is None else power
    wm = p.omega_m
    kappa = p.kappa_si
    D = Delta * wm
    omega_c = p.omega_c
    G = (2 * omega_c / p.cavity_length_L) * math.sqrt(
        P * kappa / (p.mass * wm * omega_c * (kappa**2 + D**2))
    )
    return G / wm


def power_for_coupling(p: PhysicalParams, G: float, Delta: float) -> float:
    """Drive power (W) that gives effective coupling ``G`` at effective detuning ``Delta``."""
    unit = coupling_from_power(p, Delta, power=1.0)
    return (G / unit) ** 2


@dataclass(frozen=True)
class LinearizedModel:
    """Drift and diffusion of the linearized fluctuation dynamics ``du = A u dt + noise``.

    All entries are in units of ``omega_m``.  ``diffusion`` is the Markovian
    (white-noise) diffusion matrix; :meth:`diffusion_exact` swaps the momentum
    entry for the coloured thermal spectrum.
    """

    kind: str
    drift: np.ndarray
    diffusion: np.ndarray
    mode_labels: tuple
    couplings: dict
    detunings: dict
    gamma_m: float
    kappa: float
    n0: float
    thermal_ratio: float
    omega_m: float = 1.0
    gamma_a: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("drift", "diffusion"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.drift.shape[0]

    @property
    def optical_indices(self) -> list:
        """Mode indices (not quadrature indices) of the cavity modes."""
        return [i for i, lab in enumerate(self.mode_labels) if lab.startswith("optical")]

    def mechanical_spectrum(self, omega):
        """Symmetrized thermal noise spectrum ``(gamma_m w/w_m) coth(hbar w / 2 k_B T0)``."""
        w = np.asarray(omega, dtype=float)
        x = self.thermal_ratio / self.omega_m
        with np.errstate(divide="ignore", invalid="ignore"):
            if math.isinf(x):
                out = self.gamma_m * np.abs(w) / self.omega_m
            else:
                out = self.gamma_m * (w / self.omega_m) / np.tanh(0.5 * x * w)
                out = np.where(w == 0, self.gamma_m * 2.0 / (x * self.omega_m), out)
        return out

    def diffusion_exact(self, omega: float) -> np.ndarray:
        D = np.array(self.diffusion)
        D[1, 1] = float(self.mechanical_spectrum(omega))
        return D

    def diffusion_at(self, omega: float, thermal_kind: str = "markov") -> np.ndarray:
        if thermal_kind == "markov":
            return np.array(self.diffusion)
        if thermal_kind == "exact":
            return self.diffusion_exact(omega)
        raise ValidationError("thermal_kind", f"expected 'markov' or 'exact', got {thermal_kind!r}")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)

    def with_n0(self, n0: float) -> "LinearizedModel":
        """Same couplings at a different bath occupation."""
        D = np.array(self.diffusion)
        D[1, 1] = self.gamma_m * (2 * n0 + 1)
        return replace(self, diffusion=D, n0=n0, thermal_ratio=thermal_ratio_from_n0(n0))


def _thermal(n0, thermal_ratio):
    if thermal_ratio is None:
        thermal_ratio = thermal_ratio_from_n0(n0)
    return thermal_ratio


def single_mode_model(G, Delta, kappa, gamma_m, n0, *, omega_m=1.0, thermal_ratio=None):
    """Mechanical mode coupled to one driven cavity mode (4x4)."""
    wm = omega_m
    A = np.array(
        [
            [0.0, wm, 0.0, 0.0],
            [-wm, -gamma_m, G, 0.0],
            [0.0, 0.0, -kappa, Delta],
            [G, 0.0, -Delta, -kappa],
        ]
    )
    D = np.diag([0.0, gamma_m * (2 * n0 + 1), kappa, kappa])
    return LinearizedModel(
        kind="single",
        drift=A,
        diffusion=D,
        mode_labels=("mechanical", "opticalA"),
        couplings={"G": G},
        detunings={"Delta": Delta},
        gamma_m=gamma_m,
        kappa=kappa,
        n0=n0,
        thermal_ratio=_thermal(n0, thermal_ratio),
        omega_m=wm,
    )


def two_mode_model(G_A, G_B, Delta_A, Delta_B, kappa, gamma_m, n0, *, omega_m=1.0,
                   thermal_ratio=None):
    """Mechanical mode coupled to two driven cavity modes A and B (6x6).

    The momentum damping entry is ``-gamma_m``, as in the single-mode matrix.
    """
    wm = omega_m
    A = np.zeros((6, 6))
    A[0, 1] = wm
    A[1, 0] = -wm
    A[1, 1] = -gamma_m
    A[1, 2] = G_A
    A[1, 4] = G_B
    A[2, 2] = A[3, 3] = A[4, 4] = A[5, 5] = -kappa
    A[2, 3] = Delta_A
    A[3, 2] = -Delta_A
    A[3, 0] = G_A
    A[4, 5] = Delta_B
    A[5, 4] = -Delta_B
    A[5, 0] = G_B
    D = np.diag([0.0, gamma_m * (2 * n0 + 1), kappa, kappa, kappa, kappa])
    return LinearizedModel(
        kind="two-mode",
        drift=A,
        diffusion=D,
        mode_labels=("mechanical", "opticalA", "opticalB"),
        couplings={"G_A": G_A, "G_B": G_B},
        detunings={"Delta_A": Delta_A, "Delta_B": Delta_B},
        gamma_m=gamma_m,
        kappa=kappa,
        n0=n0,
        thermal_ratio=_thermal(n0, thermal_ratio),
        omega_m=wm,
    )


def hybrid_model(G, Delta, kappa, G_a, Delta_a, gamma_a, gamma_m, n0, *, omega_m=1.0,
                 thermal_ratio=None):
    """Mechanical mode, one cavity mode and a bosonized atomic ensemble (6x6)."""
    wm = omega_m
    A = np.array(
        [
            [0.0, wm, 0.0, 0.0, 0.0, 0.0],
            [-wm, -gamma_m, G, 0.0, 0.0, 0.0],
            [0.0, 0.0, -kappa, Delta, 0.0, G_a],
            [G, 0.0, -Delta, -kappa, -G_a, 0.0],
            [0.0, 0.0, 0.0, G_a, -gamma_a, Delta_a],
            [0.0, 0.0, -G_a, 0.0, -Delta_a, -gamma_a],
        ]
    )
    D = np.diag([0.0, gamma_m * (2 * n0 + 1), kappa, kappa, gamma_a, gamma_a])
    return LinearizedModel(
        kind="hybrid",
        drift=A,
        diffusion=D,
        mode_labels=("mechanical", "opticalA", "atomic"),
        couplings={"G": G, "G_a": G_a},
        detunings={"Delta": Delta, "Delta_a": Delta_a},
        gamma_m=gamma_m,
        kappa=kappa,
        n0=n0,
        thermal_ratio=_thermal(n0, thermal_ratio),
        omega_m=wm,
        gamma_a=gamma_a,
    )


def build_single_mode_model(d: DerivedParams, op) -> LinearizedModel:
    """Model at a solved operating point (see :mod:`optomech.steady_state`)."""
    return single_mode_model(op.effective_G, op.effective_Delta, d.kappa, d.gamma_m, d.n0,
                             thermal_ratio=d.thermal_ratio)


def build_two_mode_model(d: DerivedParams, op) -> LinearizedModel:
    G_A, G_B = op.effective_G
    Delta_A, Delta_B = op.effective_Delta
    return two_mode_model(G_A, G_B, Delta_A, Delta_B, d.kappa, d.gamma_m, d.n0,
                          thermal_ratio=d.thermal_ratio)


def build_hybrid_model(d: DerivedParams, op, atom_params: dict) -> LinearizedModel:
    """``atom_params`` holds ``G_a``, ``Delta_a`` and ``gamma_a`` in units of omega_m."""
    return hybrid_model(op.effective_G, op.effective_Delta, d.kappa, atom_params["G_a"],
                        atom_params["Delta_a"], atom_params["gamma_a"], d.gamma_m, d.n0,
                        thermal_ratio=d.thermal_ratio)
