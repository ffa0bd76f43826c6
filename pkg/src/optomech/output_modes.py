"""Covariance matrices of filtered cavity-output modes.

A filtered output mode is ``a_k(t) = int_0^inf g_k(s) a_out(t - s) ds`` with
``a_out = sqrt(2 kappa) da - a_in``.  Its quadratures, together with the
mechanical ones, form a Gaussian state whose covariance matrix is a single
frequency integral

    V = int dw/2pi  T(w) [M(w) + P/2kappa] D [M(w) + P/2kappa]^dag T(w)^dag

with ``M(w) = (i w + A)^-1``, ``P`` the projector on optical quadratures and
``T(w) = int T(t) e^{i w t} dt`` built from the filter kernels.  The
``P D P / 4 kappa^2`` piece is frequency-independent; by Parseval it gives
exactly one half of the filter overlap matrix, so it is added analytically
and only the decaying remainder is integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .errors import ConvergenceError, InstabilityError, ValidationError
from .gaussian import BipartiteBlocks, log_negativity
from .lyapunov import CovarianceMatrix
from .stability import stability_report

FILTER_KINDS = ("step", "exponential")


@dataclass(frozen=True)
class FilterSpec:
    """Causal unit-norm filter centred at ``center_Omega`` with duration ``tau``.

    ``step``: ``g(t) = exp(-i Omega t) / sqrt(tau)`` on ``[0, tau]``.
    ``exponential``: ``g(t) = sqrt(2/tau) exp(-(1/tau + i Omega) t)`` for ``t >= 0``.
    ``source`` selects the cavity mode (0 = first optical mode) whose output
    is filtered.
    """

    kind: str
    center_Omega: float
    tau: float
    source: int = 0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValidationError("kind", f"expected one of {FILTER_KINDS}, got {self.kind!r}")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValidationError("tau", f"must be positive and finite, got {self.tau!r}")
        if not np.isfinite(self.center_Omega):
            raise ValidationError("center_Omega", "must be finite")

    @classmethod
    def from_epsilon(cls, kind, Omega, epsilon, omega_m=1.0, source=0) -> "FilterSpec":
        """Filter with inverse bandwidth given as ``epsilon = omega_m tau``."""
        return cls(kind, Omega, epsilon / omega_m, source)

    def kernel(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "step":
            inside = (t >= 0) & (t <= self.tau)
            return np.where(inside, np.exp(-1j * self.center_Omega * t) / math.sqrt(self.tau), 0j)
        return np.where(t >= 0, math.sqrt(2 / self.tau) * np.exp(-(1 / self.tau + 1j * self.center_Omega)
                                                                   * np.maximum(t, 0.0)), 0j)

    def transform(self, omega):
        """``g~(w) = int g(t) e^{i w t} dt``; peaks at ``w = Omega``."""
        x = np.asarray(omega, dtype=float) - self.center_Omega
        if self.kind == "step":
            h = 0.5 * x * self.tau
            return math.sqrt(self.tau) * np.exp(1j * h) * np.sinc(h / math.pi)
        return math.sqrt(2 / self.tau) / (1 / self.tau - 1j * x)

    def norm(self) -> float:
        """``int |g|^2 dt``, exactly one for both kinds."""
        if self.kind == "step":
            return self.tau * (1 / math.sqrt(self.tau)) ** 2
        return (2 / self.tau) * (self.tau / 2)


def filter_overlap(f: FilterSpec, h: FilterSpec) -> complex:
    """``int g_f(t)^* g_h(t) dt``, analytic for same-kind, same-tau pairs."""
    d = f.center_Omega - h.center_Omega
    if f.kind == h.kind and f.tau == h.tau:
        if f.kind == "step":
            x = 0.5 * d * f.tau
            return complex(np.exp(1j * x) * np.sinc(x / math.pi))
        return complex((2 / f.tau) / (2 / f.tau - 1j * d))
    upper = min(f.tau if f.kind == "step" else np.inf, h.tau if h.kind == "step" else np.inf)
    integrand = lambda t: np.conj(f.kernel(t)) * h.kernel(t)  # noqa: E731
    re = integrate.quad(lambda t: float(np.real(integrand(t))), 0, upper, limit=400)[0]
    im = integrate.quad(lambda t: float(np.imag(integrand(t))), 0, upper, limit=400)[0]
    return complex(re, im)


@dataclass(frozen=True)
class OrthonormalityReport:
    passed: bool
    max_overlap: float
    gram: np.ndarray


def check_orthonormality(filters, tol=1e-10) -> OrthonormalityReport:
    """Pairwise overlaps; passes iff every off-diagonal ``|overlap| < tol``."""
    n = len(filters)
    gram = np.array([[filter_overlap(filters[i], filters[j]) for j in range(n)] for i in range(n)])
    off = gram - np.diag(np.diag(gram))
    worst = float(np.max(np.abs(off))) if n > 1 else 0.0
    norms_ok = bool(np.all(np.abs(np.diag(gram) - 1) < 1e-12))
    return OrthonormalityReport(bool(worst < tol and norms_ok), worst, gram)


def _real_block(z):
    """2x2 real representation of multiplication by a complex number."""
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


def _sources(model, filters):
    optical = model.optical_indices
    out = []
    for f in filters:
        if f.source >= len(optical):
            raise ValidationError("source", f"model has {len(optical)} optical mode(s), got source {f.source}")
        out.append(optical[f.source])
    return out


def _exp_pieces(f: FilterSpec):
    """``g(s) = c exp(beta s)`` on ``[0, L)``."""
    if f.kind == "step":
        return 1 / math.sqrt(f.tau), -1j * f.center_Omega, f.tau
    return math.sqrt(2 / f.tau), -(1 / f.tau + 1j * f.center_Omega), math.inf


# realblock(z) = z Q_PLUS + conj(z) Q_MINUS
_JR = np.array([[0.0, -1.0], [1.0, 0.0]])
Q_PLUS = 0.5 * (np.eye(2) - 1j * _JR)
Q_MINUS = 0.5 * (np.eye(2) + 1j * _JR)


def _single(B, L):
    """``int_0^L exp(B x) dx``."""
    n = B.shape[0]
    if math.isinf(L):
        return -np.linalg.solve(B, np.eye(n))
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = B
    big[:n, n:] = np.eye(n)
    return expm(big * L)[:n, n:]


def _double(B, sigma, L):
    """``int_0^L exp(B x) int_0^{L-x} exp(sigma s) ds dx`` (Van Loan block form)."""
    n = B.shape[0]
    if math.isinf(L):
        return -np.linalg.solve(B, np.eye(n)) * (-1.0 / sigma)
    I = np.eye(n)
    big = np.zeros((3 * n, 3 * n), dtype=complex)
    big[:n, :n] = B
    big[:n, n:2 * n] = I
    big[n:2 * n, n:2 * n] = sigma * I
    big[n:2 * n, 2 * n:] = I
    return expm(big * L)[:n, 2 * n:]


def _selectors(model, src, kappa):
    n = model.n
    E = np.zeros((2, n))
    E[0, 0] = E[1, 1] = 1.0
    H, J = [E], [np.zeros((2, n))]
    root = math.sqrt(2 * kappa)
    for k in src:
        S = np.zeros((2, n))
        S[0, 2 * k] = S[1, 2 * k + 1] = 1.0
        H.append(root * S)
        J.append(-S / root)
    return H, J


def _output_cm_exact(model, filters, src):
    """Closed form for white noise: every term is an integral of ``exp(A t)``
    against exponential filter pieces, evaluated with block matrix exponentials.
    """
    from .lyapunov import solve_lyapunov

    A = np.asarray(model.drift, dtype=float)
    D = np.asarray(model.diffusion, dtype=float)
    V = solve_lyapunov(A, D).entries
    kappa = model.kappa
    H, J = _selectors(model, src, kappa)
    N = len(filters)
    # right factors R_k = V H_k^T + D J_k^T so that K_jk(x > 0) = H_j exp(A x) R_k
    R = [V @ H[k].T + D @ J[k].T for k in range(N + 1)]
    pieces = [_exp_pieces(f) for f in filters]
    out = np.zeros((2 + 2 * N, 2 + 2 * N), dtype=complex)
    out[:2, :2] = V[:2, :2]
    for k, (c, b, L) in enumerate(pieces, start=1):
        sl = slice(2 * k, 2 * k + 2)
        acc = np.zeros((2, 2), dtype=complex)
        for w, beta, Q in ((c, b, Q_PLUS), (np.conj(c), np.conj(b), Q_MINUS)):
            acc += w * H[0] @ _single(A + beta * np.eye(A.shape[0]), L) @ R[k] @ Q.T
        out[:2, sl] = acc
        out[sl, :2] = acc.conj().T
    I = np.eye(A.shape[0])
    for j, (cj, bj, Lj) in enumerate(pieces, start=1):
        for k, (ck, bk, Lk) in enumerate(pieces, start=1):
            if k < j:
                continue
            if Lj != Lk:
                raise ValidationError("filters", "exact evaluation needs filters of equal duration")
            L = Lj
            acc = np.zeros((2, 2), dtype=complex)
            for w1, b1, Q1 in ((cj, bj, Q_PLUS), (np.conj(cj), np.conj(bj), Q_MINUS)):
                for w2, b2, Q2 in ((ck, bk, Q_PLUS), (np.conj(ck), np.conj(bk), Q_MINUS)):
                    sigma = b1 + b2
                    later = H[j] @ _double(A + b2 * I, sigma, L) @ R[k]
                    earlier = R[j].T @ _double(A.T + b1 * I, sigma, L) @ H[k].T
                    acc += w1 * w2 * Q1 @ (later + earlier) @ Q2.T
            if src[j - 1] == src[k - 1]:
                z = np.conj(filter_overlap(filters[j - 1], filters[k - 1]))
                acc += 0.5 * D[2 * src[j - 1], 2 * src[j - 1]] / kappa * _real_block(z)
            out[2 * j:2 * j + 2, 2 * k:2 * k + 2] = acc
            out[2 * k:2 * k + 2, 2 * j:2 * j + 2] = acc.conj().T
    if np.max(np.abs(out.imag)) > 1e-8 * max(1.0, np.max(np.abs(out.real))):
        raise ConvergenceError("closed-form output covariance is not real", float(np.max(np.abs(out.imag))))
    return out.real


def _feature_breakpoints(centers_widths, cutoff, uniform=None):
    pts = {0.0, cutoff}
    for c, w in centers_widths:
        if w <= 0:
            continue
        step = w / 8
        while step < cutoff:
            for y in (c - step, c + step):
                if 0 < y < cutoff:
                    pts.add(y)
            step *= 2
        if 0 < c < cutoff:
            pts.add(c)
    if uniform is not None:
        h, lo, hi = uniform
        pts.update(np.arange(max(lo, 0.0), min(hi, cutoff), h).tolist())
    return np.array(sorted(pts))


def _output_cm_quadrature(model, filters, src, thermal_kind, rtol, max_levels=6):
    """Composite Gauss-Legendre on feature-adapted panels, refined by bisection
    until two successive levels agree to ``rtol``."""
    A = np.asarray(model.drift, dtype=float)
    n = A.shape[0]
    kappa = model.kappa
    N = len(filters)
    m = 2 + 2 * N
    P = np.zeros(n)
    for k in model.optical_indices:
        P[2 * k:2 * k + 2] = 1.0
    P_over = np.diag(P) / (2 * kappa)
    sel = np.zeros((m, n))
    sel[0, 0] = sel[1, 1] = 1.0
    for j, k in enumerate(src):
        sel[2 + 2 * j, 2 * k] = 1.0
        sel[3 + 2 * j, 2 * k + 1] = 1.0
    root = math.sqrt(2 * kappa)
    D0 = np.asarray(model.diffusion, dtype=float)
    I = np.eye(n)

    def F(w):
        w = np.asarray(w, dtype=float)
        K = w.size
        Minv = 1j * w[:, None, None] * I[None] + A[None]
        M = np.linalg.solve(Minv, np.broadcast_to(I, (K, n, n)).astype(complex))
        Dw = np.broadcast_to(D0, (K, n, n)).copy()
        if thermal_kind != "markov":
            Dw[:, 1, 1] = model.mechanical_spectrum(w) if thermal_kind == "exact" else D0[1, 1]
        MH = np.conj(np.swapaxes(M, 1, 2))
        core = M @ Dw @ MH + M @ Dw @ P_over + P_over @ Dw @ MH
        T = np.zeros((K, m, m), dtype=complex)
        T[:, 0, 0] = T[:, 1, 1] = 1.0
        for j, f in enumerate(filters):
            gp = f.transform(w)
            gm = np.conj(f.transform(-w))
            re_t = 0.5 * (gp + gm)
            im_t = (gp - gm) / 2j
            s = 2 + 2 * j
            T[:, s, s] = T[:, s + 1, s + 1] = root * re_t
            T[:, s, s + 1] = -root * im_t
            T[:, s + 1, s] = root * im_t
        S = T @ (sel @ core @ sel.T) @ np.conj(np.swapaxes(T, 1, 2))
        return S.real

    ev = np.linalg.eigvals(A)
    feats = [(abs(z.imag), abs(z.real)) for z in ev]
    feats += [(abs(f.center_Omega), 1.0 / f.tau) for f in filters]
    scale = max([1.0, kappa] + [c + w for c, w in feats])
    cutoff = 200.0 * scale
    uniform = None
    steps = [f for f in filters if f.kind == "step"]
    if steps:
        tau = max(f.tau for f in steps)
        uniform = (math.pi / tau, 0.0, cutoff)
    edges = _feature_breakpoints(feats, cutoff, uniform)
    x, wts = np.polynomial.legendre.leggauss(16)

    def panel_sum(e):
        a, b = e[:-1], e[1:]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        vals = F(nodes.ravel()).reshape(len(a), len(x), m, m)
        return np.einsum("p,pq,pqij->ij", half, np.broadcast_to(wts, (len(a), len(x))), vals)

    def tail():
        # w = cutoff / t on (0, 1]: dw = cutoff / t^2 dt
        t = 0.5 * (x + 1)
        vals = F(cutoff / t)
        return 0.5 * np.einsum("q,qij->ij", wts * cutoff / t**2, vals)

    total_tail = tail()
    prev = panel_sum(edges) + total_tail
    for _ in range(max_levels):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        cur = panel_sum(edges) + total_tail
        if np.max(np.abs(cur - prev)) <= rtol * np.max(np.abs(cur)):
            V = cur / math.pi
            break
        prev = cur
    else:
        err = float(np.max(np.abs(cur - prev)) / np.max(np.abs(cur)))
        raise ConvergenceError(f"output covariance quadrature reached only {err:.2e}", err)
    for i in range(N):
        for j in range(N):
            if src[i] == src[j]:
                z = np.conj(filter_overlap(filters[i], filters[j]))
                V[2 + 2 * i:4 + 2 * i, 2 + 2 * j:4 + 2 * j] += 0.5 * D0[2 * src[i], 2 * src[i]] \
                    / kappa * _real_block(z)
    return V


def output_cm(model, filters, thermal_kind="markov", *, method="auto",
              rtol=1e-7) -> CovarianceMatrix:
    """Covariance matrix of (mechanical mode, filtered output 1, ..., N).

    ``method='quadrature'`` integrates the frequency-domain expression;
    ``method='exact'`` evaluates the same quantity in the time domain with
    matrix exponentials (white noise only, so ``thermal_kind='markov'``).
    ``thermal_kind='exact'`` uses the coth thermal spectrum for the
    mechanical noise.  ``'auto'`` picks the closed form whenever it applies.
    """
    filters = list(filters)
    if not filters:
        raise ValidationError("filters", "need at least one output filter")
    report = stability_report(model)
    if not (report.is_stable and report.max_re_eigenvalue < 0):
        raise InstabilityError(f"{model.kind} model is unstable", report)
    src = _sources(model, filters)
    if method == "auto":
        same = len({(f.kind, f.tau) for f in filters}) == 1
        method = "exact" if thermal_kind == "markov" and same else "quadrature"
    if method == "exact":
        if thermal_kind != "markov":
            raise ValidationError("thermal_kind", "the closed form needs white (markov) noise")
        V = _output_cm_exact(model, filters, src)
    elif method == "quadrature":
        V = _output_cm_quadrature(model, filters, src, thermal_kind, rtol)
    else:
        raise ValidationError("method", f"expected 'auto', 'quadrature' or 'exact', got {method!r}")
    labels = ["mechanical"] + [f"output{j + 1}" for j in range(len(filters))]
    return CovarianceMatrix(V, labels)


def mech_output_entanglement(model, filt: FilterSpec, thermal_kind="markov") -> float:
    """Logarithmic negativity between the mechanical mode and one filtered output."""
    V = output_cm(model, [filt], thermal_kind)
    return log_negativity(BipartiteBlocks.from_cm(V, 0, 1))


def sideband_entanglement(model, Omega1, Omega2, tau, kind="step", thermal_kind="markov") -> float:
    """Logarithmic negativity between two filtered outputs of one cavity mode.

    The mechanical mode is traced out.  Step filters must satisfy the
    orthogonality condition ``Omega1 - Omega2 = 2 pi p / tau``.
    """
    filters = [FilterSpec(kind, Omega1, tau), FilterSpec(kind, Omega2, tau)]
    if kind == "step":
        rep = check_orthonormality(filters, tol=1e-8)
        if not rep.passed:
            raise ValidationError("Omega2", f"step filters overlap by {rep.max_overlap:.2e}")
    V = output_cm(model, filters, thermal_kind)
    return log_negativity(BipartiteBlocks.from_cm(V, 1, 2))


def two_mode_output_cm(model, filterA: FilterSpec, filterB: FilterSpec, thermal_kind="markov"):
    """(mechanical, output of cavity A, output of cavity B) for a two-mode model."""
    if model.kind != "two-mode":
        raise ValidationError("model", "two_mode_output_cm needs a two-mode model")
    fA = FilterSpec(filterA.kind, filterA.center_Omega, filterA.tau, 0)
    fB = FilterSpec(filterB.kind, filterB.center_Omega, filterB.tau, 1)
    V = output_cm(model, [fA, fB], thermal_kind)
    return CovarianceMatrix(V.entries, ("mechanical", "outputA", "outputB"))
