"""Steady-state covariance matrices from ``A V + V A^T + D = 0``."""

from __future__ import annotations

import numpy as np

from .errors import DegeneracyError, InstabilityError, PhysicalityError
from .stability import max_real_eigenvalue, stability_report


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form for ``(q1, p1, q2, p2, ...)`` ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum (ascending) of a real symmetric ``2N x 2N`` matrix.

    These are the moduli of the eigenvalues of ``i Omega V``; each appears
    twice in that spectrum.
    """
    V = np.asarray(V, dtype=float)
    n = V.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ V))
    return np.sort(ev)[::2]


class CovarianceMatrix:
    """Symmetrized quadrature covariance matrix with per-mode block access.

    Vacuum has variance 1/2 per quadrature.  The matrix is symmetrized on
    construction; ``check=True`` enforces the uncertainty principle.
    """

    def __init__(self, entries, mode_labels=None, *, check=False, slack=1e-9):
        V = np.array(entries, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
            raise ValueError(f"covariance matrix must be 2N x 2N, got shape {V.shape}")
        V = 0.5 * (V + V.T)
        V.setflags(write=False)
        self.entries = V
        n = V.shape[0] // 2
        if mode_labels is None:
            mode_labels = tuple(f"mode{k}" for k in range(n))
        if len(mode_labels) != n:
            raise ValueError("need one label per mode")
        self.mode_labels = tuple(mode_labels)
        if check and not self.is_physical(slack):
            nu = self.symplectic_eigenvalues()[0]
            raise PhysicalityError(f"smallest symplectic eigenvalue {nu:.6g} < 1/2")

    def __repr__(self):
        return f"CovarianceMatrix(modes={self.mode_labels})"

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    def index(self, mode) -> int:
        if isinstance(mode, str):
            return self.mode_labels.index(mode)
        return int(mode)

    def block(self, i, j) -> np.ndarray:
        i, j = self.index(i), self.index(j)
        return self.entries[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def reduced(self, modes) -> "CovarianceMatrix":
        """Marginal covariance matrix of a subset of modes (in the given order)."""
        idx = [self.index(m) for m in modes]
        q = np.concatenate([[2 * k, 2 * k + 1] for k in idx])
        return CovarianceMatrix(self.entries[np.ix_(q, q)], [self.mode_labels[k] for k in idx])

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.entries)

    def is_physical(self, slack=1e-9) -> bool:
        return bool(self.symplectic_eigenvalues()[0] >= 0.5 - slack)


def _symmetric_basis(n):
    """Duplication matrix mapping the ``n(n+1)/2`` upper entries to ``vec(V)``."""
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    Dup = np.zeros((n * n, len(pairs)))
    for k, (i, j) in enumerate(pairs):
        Dup[i * n + j, k] = 1.0
        Dup[j * n + i, k] = 1.0
    return pairs, Dup


def solve_lyapunov(A, D, mode_labels=None, *, rtol=1e-10) -> CovarianceMatrix:
    """Solve ``A V + V A^T = -D`` for stable ``A``.

    The equation is written as a dense linear system in the independent
    entries of the symmetric unknown.  Raises :class:`InstabilityError` if
    ``A`` has an eigenvalue with non-negative real part.
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A.shape[0]
    lam = max_real_eigenvalue(A)
    if not lam < 0:
        raise InstabilityError(f"drift matrix is not stable (max Re eigenvalue {lam:.3e})")
    pairs, Dup = _symmetric_basis(n)
    I = np.eye(n)
    # row-major vec: vec(A V) = kron(A, I) vec(V), vec(V A^T) = kron(I, A) vec(V)
    L = (np.kron(A, I) + np.kron(I, A)) @ Dup
    rows = [i * n + j for (i, j) in pairs]
    M = L[rows]
    rhs = -0.5 * (D + D.T).reshape(-1)[rows]
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(f"Lyapunov system is singular: {exc}") from exc
    V = (Dup @ x).reshape(n, n)
    V = 0.5 * (V + V.T)

    def tolerance(V):
        # rtol * |D|, widened only by the rounding floor of storing V in float64
        floor = 8 * n * np.finfo(float).eps * np.max(np.abs(A)) * np.max(np.abs(V))
        return rtol * max(np.max(np.abs(D)), 1e-300) + floor

    resid = np.max(np.abs(A @ V + V @ A.T + D))
    for _ in range(3):
        if resid <= tolerance(V):
            break
        x = x + np.linalg.solve(M, rhs - M @ x)
        V = (Dup @ x).reshape(n, n)
        V = 0.5 * (V + V.T)
        resid = np.max(np.abs(A @ V + V @ A.T + D))
    if not resid <= tolerance(V):
        raise DegeneracyError(f"Lyapunov residual {resid:.3e} exceeds tolerance {tolerance(V):.3e}")
    if mode_labels is None:
        mode_labels = tuple(f"mode{k}" for k in range(n // 2))
    return CovarianceMatrix(V, mode_labels)


def steady_state_cm(model) -> CovarianceMatrix:
    """Stability-gated intracavity covariance matrix of a :class:`LinearizedModel`."""
    report = stability_report(model)
    if not report.is_stable or not report.max_re_eigenvalue < 0:
        raise InstabilityError(
            f"{model.kind} model is unstable (max Re eigenvalue {report.max_re_eigenvalue:.3e})",
            report,
        )
    return solve_lyapunov(model.drift, model.diffusion, model.mode_labels)
