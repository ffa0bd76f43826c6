"""Monte-Carlo cross-check of the covariance solvers.

The linearized Langevin equations ``du = A u dt + B dW`` (``B B^T = D``) are
integrated with Euler-Maruyama.  Second moments are averaged over time after
a burn-in and over an ensemble of independent trajectories; standard errors
come from a delete-one jackknife over trajectories.

Each trajectory owns its random stream, seeded by ``(seed, index)``, so the
result does not depend on batch size or on how batches are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, ValidationError
from .lyapunov import CovarianceMatrix
from .output_modes import FilterSpec, _sources
from .stability import max_real_eigenvalue

ESCAPE = 1e6
STEP_GUARD = 0.05
RELAX_GUARD = 10.0


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon and ensemble size (times in units of ``1/omega_m``).

    ``t_end`` is the total simulated time, burn-in included.
    """

    dt: float
    t_end: float
    n_traj: int
    seed: int = 0
    burn_in: float = 0.0
    batch: int = 256
    chunk: int = 400

    def validate(self, model, filters=()):
        A = np.asarray(model.drift, dtype=float)
        ev = np.linalg.eigvals(A)
        lam = max_real_eigenvalue(A)
        if not lam < 0:
            raise InstabilityError(f"cannot sample an unstable model (max Re eigenvalue {lam:.3e})")
        if not (self.dt > 0 and self.dt * np.max(np.abs(ev)) < STEP_GUARD):
            raise ValidationError("dt", f"dt * max|eig| must be below {STEP_GUARD}")
        need = RELAX_GUARD / abs(lam)
        for f in filters:
            if f.kind == "exponential":
                need = max(need, RELAX_GUARD / abs(lam) + RELAX_GUARD * f.tau)
        if self.burn_in < need:
            raise ValidationError("burn_in", f"burn-in {self.burn_in:.4g} shorter than required {need:.4g}")
        if not self.t_end > self.burn_in:
            raise ValidationError("t_end", "must exceed burn_in")
        if self.n_traj < 2:
            raise ValidationError("n_traj", "jackknife needs at least two trajectories")

    @classmethod
    def for_model(cls, model, *, n_traj=2000, seed=0, sample_time=50.0, bias=0.01,
                  filters=(), batch=1024) -> "SimConfig":
        """Smallest admissible burn-in and a step sized for accuracy.

        Besides the stability guard, Euler-Maruyama inflates the stationary
        variance of a mode with eigenvalue ``lam`` by roughly
        ``dt |lam|^2 / (2 |Re lam|)``; the step keeps that below ``bias``.
        """
        A = np.asarray(model.drift, dtype=float)
        ev = np.linalg.eigvals(A)
        dt = 0.5 * STEP_GUARD / float(np.max(np.abs(ev)))
        dt = min(dt, bias * float(np.min(2 * np.abs(ev.real) / np.abs(ev) ** 2)))
        lam = abs(max_real_eigenvalue(A))
        burn = RELAX_GUARD / lam
        for f in filters:
            if f.kind == "exponential":
                burn = max(burn, RELAX_GUARD / lam + RELAX_GUARD * f.tau)
            else:
                # align the step with the filter window
                dt = f.tau / math.ceil(f.tau / dt)
        burn = math.ceil(burn / dt) * dt
        return cls(dt=dt, t_end=burn + sample_time, n_traj=n_traj, seed=seed, burn_in=burn,
                   batch=batch)


@dataclass(frozen=True)
class SimResult:
    cm: CovarianceMatrix
    stderr: np.ndarray
    n_samples: int

    def agrees_with(self, V, n_sigma=3.0, rel=0.05) -> np.ndarray:
        """Entrywise agreement mask: within ``n_sigma`` standard errors and within
        ``rel`` of ``sqrt(V_ii V_jj)``."""
        V = np.asarray(V, dtype=float)
        diff = np.abs(self.cm.entries - V)
        scale = np.sqrt(np.outer(np.diag(V), np.diag(V)))
        return (diff <= n_sigma * self.stderr) & (diff <= rel * scale)


def _streams(seed, start, stop):
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k])))
            for k in range(start, stop)]


def _jackknife(per_traj):
    """Mean and delete-one jackknife standard error over the leading axis."""
    N = per_traj.shape[0]
    total = per_traj.sum(axis=0)
    mean = total / N
    loo = (total[None] - per_traj) / (N - 1)
    err = np.sqrt((N - 1) / N * np.sum((loo - mean[None]) ** 2, axis=0))
    return mean, err


def _noise_map(D):
    idx = np.flatnonzero(np.diag(D) > 0)
    return idx, np.sqrt(np.diag(D)[idx])


def _run_batch(model, cfg, start, stop, filters, dump):
    """Second moments of (u or mechanical + filtered outputs) for trajectories
    ``start..stop``; returns an array of shape (batch, m, m)."""
    A = np.asarray(model.drift, dtype=float)
    D = np.asarray(model.diffusion, dtype=float)
    n = A.shape[0]
    nb = stop - start
    dt = cfg.dt
    idx, amp = _noise_map(D)
    sq = math.sqrt(dt)
    gens = _streams(cfg.seed, start, stop)
    n_steps = int(round(cfg.t_end / dt))
    n_burn = int(round(cfg.burn_in / dt))
    step_mat = (np.eye(n) + dt * A).T

    kappa = model.kappa
    root = math.sqrt(2 * kappa)
    # outputs: filter k reads cavity (quadrature columns), noise columns in idx
    outs = []
    for f, k in zip(filters, _sources(model, filters) if filters else ()):
        cols = (2 * k, 2 * k + 1)
        ncols = tuple(int(np.flatnonzero(idx == c)[0]) for c in cols)
        outs.append((f, cols, ncols))
    m = n if not filters else 2 + 2 * len(filters)
    acc = np.zeros((nb, m, m))
    count = 0
    u = np.zeros((nb, n))
    t = 0.0
    win = [np.zeros(nb, dtype=complex) for _ in filters]
    if filters:
        tau = filters[0].tau
        window = int(round(tau / dt))
        if any(f.kind == "step" for f in filters) and abs(window * dt - tau) > 1e-9 * tau:
            raise ValidationError("dt", "step filters need tau to be a whole number of steps")

    rows = []
    step = 0
    while step < n_steps:
        K = min(cfg.chunk, n_steps - step)
        xi = np.stack([g.standard_normal((K, len(idx))) for g in gens], axis=1)
        inc = np.zeros((K, nb, n))
        inc[:, :, idx] = (sq * amp) * xi
        if filters:
            # input-noise part of the output increment, (dW_X + i dW_Y) / sqrt 2
            dWin = [(sq / math.sqrt(2)) * (xi[:, :, nc[0]] + 1j * xi[:, :, nc[1]]) for _, _, nc in outs]
        else:
            states = np.empty((K, nb, n))
        for j in range(K):
            if filters:
                for q, (f, cols, _) in enumerate(outs):
                    # output increment a_out dt = sqrt(2 kappa) (X + iY) dt - input noise
                    da = root * dt * (u[:, cols[0]] + 1j * u[:, cols[1]]) - dWin[q][j]
                    if f.kind == "step":
                        win[q] += np.exp(1j * f.center_Omega * t) * da
                    else:
                        c, beta = math.sqrt(2 / f.tau), -(1 / f.tau + 1j * f.center_Omega)
                        win[q] = np.exp(beta * dt) * (win[q] + c * da)
            u = u @ step_mat
            u += inc[j]
            t = (step + j + 1) * dt
            s = step + j + 1
            if filters:
                if s % window == 0:
                    if s > n_burn:
                        vec = np.empty((nb, m))
                        vec[:, :2] = u[:, :2]
                        for q, (f, _, _) in enumerate(outs):
                            if f.kind == "step":
                                a = win[q] * np.exp(-1j * f.center_Omega * t) / math.sqrt(f.tau)
                            else:
                                a = win[q]
                            vec[:, 2 + 2 * q] = a.real
                            vec[:, 3 + 2 * q] = a.imag
                        acc += np.einsum("bi,bj->bij", vec, vec)
                        count += 1
                    for q, (f, _, _) in enumerate(outs):
                        if f.kind == "step":
                            win[q] = np.zeros(nb, dtype=complex)
            else:
                states[j] = u
            if dump is not None and s % dump[1] == 0:
                rows.append(np.concatenate([[t], u[0]]))
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > ESCAPE:
            raise InstabilityError(f"trajectory escaped (|u| > {ESCAPE:g}) near t = {t:.4g}")
        if not filters:
            first = max(0, n_burn - step)
            if first < K:
                sl = states[first:]
                acc += np.einsum("kbi,kbj->bij", sl, sl)
                count += K - first
        step += K
    if dump is not None:
        header = "t " + " ".join(f"u{k}" for k in range(n))
        np.savetxt(dump[0], np.array(rows), header=header, fmt="%.12g")
    return acc / max(count, 1), count


def _ensemble(model, cfg, filters, workers, dump_path, dump_every):
    cfg.validate(model, filters)
    bounds = [(s, min(s + cfg.batch, cfg.n_traj)) for s in range(0, cfg.n_traj, cfg.batch)]

    def job(b):
        dump = (dump_path, dump_every) if (dump_path is not None and b[0] == 0) else None
        return _run_batch(model, cfg, b[0], b[1], filters, dump)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    per_traj = np.concatenate([p[0] for p in parts], axis=0)
    mean, err = _jackknife(per_traj)
    mean = 0.5 * (mean + mean.T)
    err = 0.5 * (err + err.T)
    return mean, err, parts[0][1] * cfg.n_traj


def simulate_cm(model, cfg: SimConfig, *, workers=None, dump_path=None, dump_every=10) -> SimResult:
    """Sampled steady-state covariance matrix of ``u`` with jackknife errors.

    ``dump_path`` writes trajectory 0 as whitespace-separated columns
    ``t u0 u1 ...`` (the quadrature order of the model) every ``dump_every`` steps.
    """
    mean, err, ns = _ensemble(model, cfg, (), workers, dump_path, dump_every)
    return SimResult(CovarianceMatrix(mean, model.mode_labels), err, ns)


def simulate_filtered_output(model, filters, cfg: SimConfig, *, workers=None) -> SimResult:
    """Joint covariance of the mechanical mode and filtered output modes.

    The output field ``sqrt(2 kappa) X - X_in`` is convolved with each
    filter on the fly: step filters over back-to-back windows of length
    ``tau``, exponential filters through their one-pole recursion.  Samples
    are taken every ``tau`` after burn-in.
    """
    if isinstance(filters, FilterSpec):
        filters = [filters]
    filters = list(filters)
    if not filters:
        raise ValidationError("filters", "need at least one filter")
    if len({f.tau for f in filters}) != 1:
        raise ValidationError("filters", "all filters must share tau")
    mean, err, ns = _ensemble(model, cfg, filters, workers, None, 1)
    labels = ["mechanical"] + [f"output{j + 1}" for j in range(len(filters))]
    return SimResult(CovarianceMatrix(mean, labels), err, ns)
