"""Observables of zero-mean Gaussian states given their covariance matrix.

Vacuum variance is 1/2, so a state is physical iff every symplectic
eigenvalue is at least 1/2, and a bipartition is entangled iff the smallest
symplectic eigenvalue of the partially transposed matrix drops below 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PhysicalityError
from .lyapunov import CovarianceMatrix, symplectic_eigenvalues

RADICAND_TOL = 1e-12


def _as_array(V):
    if isinstance(V, CovarianceMatrix):
        return V.entries
    return np.asarray(V, dtype=float)


@dataclass(frozen=True)
class BipartiteBlocks:
    """The 2x2 blocks ``[[V1, Vc], [Vc^T, V2]]`` of a two-mode covariance matrix."""

    V1: np.ndarray
    V2: np.ndarray
    Vc: np.ndarray

    @classmethod
    def from_cm(cls, V, i=0, j=1) -> "BipartiteBlocks":
        """Blocks for modes ``i`` and ``j`` (indices or labels) of a larger matrix."""
        if isinstance(V, CovarianceMatrix):
            return cls(V.block(i, i).copy(), V.block(j, j).copy(), V.block(i, j).copy())
        V = np.asarray(V, dtype=float)
        s1, s2 = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
        return cls(V[s1, s1].copy(), V[s2, s2].copy(), V[s1, s2].copy())

    def matrix(self) -> np.ndarray:
        return np.block([[self.V1, self.Vc], [self.Vc.T, self.V2]])

    @property
    def sigma(self) -> float:
        return float(np.linalg.det(self.V1) + np.linalg.det(self.V2) - 2 * np.linalg.det(self.Vc))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix()))


def eta_minus(blocks: BipartiteBlocks) -> float:
    """Smallest symplectic eigenvalue of the partially transposed two-mode matrix."""
    sigma = blocks.sigma
    detV = blocks.det
    rad = sigma**2 - 4 * detV
    scale = max(sigma**2, 1e-300)
    if rad < 0:
        if rad < -RADICAND_TOL * scale:
            raise PhysicalityError(f"negative radicand {rad:.3e} in partial-transpose spectrum")
        rad = 0.0
    inner = sigma - math.sqrt(rad)
    if inner < 0:
        if inner < -RADICAND_TOL * max(abs(sigma), 1e-300):
            raise PhysicalityError("negative partial-transpose eigenvalue")
        inner = 0.0
    return math.sqrt(inner / 2.0)


def log_negativity(blocks: BipartiteBlocks) -> float:
    """``E_N = max(0, -ln 2 eta_minus)``."""
    nu = eta_minus(blocks)
    if nu <= 0:
        return math.inf
    return max(0.0, -math.log(2 * nu))


def log_negativity_modes(V, i, j) -> float:
    """Logarithmic negativity between modes ``i`` and ``j`` of a multimode matrix."""
    return log_negativity(BipartiteBlocks.from_cm(V, i, j))


def simon_criterion(blocks: BipartiteBlocks) -> bool:
    """True iff ``4 det V < Sigma(V) - 1/4`` (entangled)."""
    return bool(4 * blocks.det < blocks.sigma - 0.25)


def occupancy(V, mechanical_mode_index=0):
    """Mean phonon number ``(V_qq + V_pp - 1)/2`` and the ratio ``V_qq / V_pp``."""
    V = _as_array(V)
    k = 2 * mechanical_mode_index
    vq, vp = V[k, k], V[k + 1, k + 1]
    n = 0.5 * (vq + vp - 1.0)
    if n < -1e-9:
        raise PhysicalityError(f"negative occupancy {n:.3e}")
    return max(n, 0.0), vq / vp


def partial_transpose(V, modes) -> np.ndarray:
    """Covariance matrix after time reversal (``p -> -p``) of the listed modes."""
    V = np.array(_as_array(V))
    flip = np.ones(V.shape[0])
    for m in modes:
        flip[2 * m + 1] = -1.0
    return V * np.outer(flip, flip)


def min_pt_symplectic(V, modes) -> float:
    """Smallest symplectic eigenvalue of the partial transpose over ``modes``."""
    return float(symplectic_eigenvalues(partial_transpose(V, modes))[0])


def log_negativity_partition(V, modes) -> float:
    """Logarithmic negativity of the bipartition ``modes | rest``."""
    nu = symplectic_eigenvalues(partial_transpose(V, modes))
    return float(np.sum(np.maximum(0.0, -np.log(2 * nu))))


TRIPARTITE_LABELS = {
    3: "fully tripartite-entangled",
    2: "one-mode biseparable",
    1: "two-mode biseparable",
    0: "PPT in every bipartition",
}


@dataclass(frozen=True)
class TripartiteReport:
    label: str
    eta_minus: dict
    npt: dict

    @property
    def n_npt(self) -> int:
        return sum(self.npt.values())


def tripartite_class(V, tol=1e-10) -> TripartiteReport:
    """PPT pattern of the three ``1 | 2`` bipartitions of a three-mode state.

    ``eta_minus[k]`` is the smallest partially transposed symplectic
    eigenvalue when mode ``k`` is split from the other two.
    """
    V = _as_array(V)
    if V.shape != (6, 6):
        raise ValueError("tripartite classification needs a 6x6 covariance matrix")
    etas = {k: min_pt_symplectic(V, [k]) for k in range(3)}
    npt = {k: bool(etas[k] < 0.5 - tol) for k in range(3)}
    return TripartiteReport(TRIPARTITE_LABELS[sum(npt.values())], etas, npt)


def swap_fidelity(V1, V2) -> float:
    """Fidelity between two single-mode zero-mean Gaussian states."""
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    d1 = np.linalg.det(V1) - 0.25
    d2 = np.linalg.det(V2) - 0.25
    prod = max(d1 * d2, 0.0)
    F = 1.0 / (math.sqrt(np.linalg.det(V1 + V2) + prod) - math.sqrt(prod))
    if F > 1 + 1e-9:
        raise PhysicalityError(f"fidelity {F:.12g} exceeds one")
    return min(F, 1.0)


def en_upper_bound(G, kappa, gamma_m, n0) -> float:
    """``ln[(1 + G / sqrt(2 kappa gamma_m)) / (1 + n0)]``; may be negative."""
    return math.log((1 + G / math.sqrt(2 * kappa * gamma_m)) / (1 + n0))


def two_mode_squeezed(r) -> np.ndarray:
    """Two-mode squeezed vacuum with squeezing parameter ``r``."""
    c, s = math.cosh(2 * r) / 2, math.sinh(2 * r) / 2
    return np.block([[c * np.eye(2), s * np.diag([1.0, -1.0])],
                     [s * np.diag([1.0, -1.0]), c * np.eye(2)]])


def random_physical_cm(n_modes, rng, max_squeeze=1.0, max_thermal=2.0) -> np.ndarray:
    """Random physical covariance matrix ``S diag(nu) S^T`` with a random symplectic ``S``.

    ``S`` is built from random passive rotations and single-mode squeezers
    (Bloch-Messiah form), so it is exactly symplectic.
    """
    nu = 0.5 + rng.uniform(0, max_thermal, n_modes)
    V0 = np.diag(np.repeat(nu, 2))
    S = _random_passive(n_modes, rng) @ np.diag(
        np.concatenate([[math.exp(z), math.exp(-z)] for z in rng.uniform(-max_squeeze, max_squeeze, n_modes)])
    ) @ _random_passive(n_modes, rng)
    return S @ V0 @ S.T


def _random_passive(n, rng):
    """Real symplectic orthogonal matrix from a Haar-ish random unitary."""
    from scipy.stats import unitary_group

    U = unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
    X, Y = U.real, U.imag
    O = np.zeros((2 * n, 2 * n))
    # (q1, p1, q2, p2, ...) ordering
    O[0::2, 0::2] = X
    O[0::2, 1::2] = -Y
    O[1::2, 0::2] = Y
    O[1::2, 1::2] = X
    return O
