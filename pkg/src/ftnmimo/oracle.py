"""Independent checks of the capacity engines.

:func:`brute_force_capacity` maximizes the block mutual information directly
over input covariances with a generic projected-gradient method. It shares
no code with the waterfilling solvers: the channel operator is rebuilt here
from pulse samples and the Gram square root comes from ``scipy.linalg.sqrtm``.

:func:`szego_convergence` measures how fast finite-``N`` block quantities
approach their frequency-domain limits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .capacity_freq import equal_power_capacity_spectral
from .capacity_time import _phi_matrix
from .channel import as_fs
from .exceptions import DimensionCap, NotConverged
from .gram import DEFAULT_COND_TOL
from .pulse import PulseConfig, g_lags

__all__ = ["OracleResult", "SzegoRow", "brute_force_capacity", "szego_convergence", "project_spectraplex"]

ORACLE_DIM_CAP = 32
LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class OracleResult:
    objective: float
    iterations: int
    residual: float
    feasibility: float
    covariance: np.ndarray
    converged: bool
    history: np.ndarray


def _project_simplex(v, total):
    """Euclidean projection of ``v`` onto ``{w >= 0, sum w = total}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_spectraplex(Y, total):
    """Nearest Hermitian PSD matrix with trace ``total`` (Frobenius norm)."""
    Y = 0.5 * (Y + Y.conj().T)
    w, V = np.linalg.eigh(Y)
    w = _project_simplex(w, total)
    return (V * w) @ V.conj().T


def _operator(fs, cfg, N):
    """``G_H`` entrywise: ``[k N + n, l N + m] = sum_j h^j_kl g[n - m - j]``."""
    n = np.arange(N)
    lag = n[:, None] - n[None, :]
    GH = np.zeros((fs.K * N, fs.L * N), dtype=complex)
    for j in range(fs.J):
        Gj = g_lags(cfg, lag - j)
        for k in range(fs.K):
            for l in range(fs.L):
                GH[k * N:(k + 1) * N, l * N:(l + 1) * N] += fs.taps[j, k, l] * Gj
    return GH


def brute_force_capacity(ch, power: float, noise: float, cfg: PulseConfig, N: int, *,
                         max_iter: int = 5000, rel_tol: float = 1e-10,
                         armijo: float = 1e-4) -> OracleResult:
    """Maximize ``(1/N) log2 det(I + G_H S G_H^H (I kron G^{-1}) / s2)`` by projected gradient.

    The variable is the whitened covariance ``K = B^{1/2} S B^{1/2}`` with
    ``B = I_L kron G``, so the power constraint
    ``(1/(N dT)) tr(B S) = P`` becomes ``tr K = N dT P`` and the feasible set
    is the spectraplex, onto which projection is exact. Steps are accepted by
    Armijo backtracking, so the objective never decreases. Starts from the
    white input ``S = c I``.

    Raises :class:`NotConverged` (carrying the best iterate) if the relative
    improvement is still above ``rel_tol`` after ``max_iter`` iterations.
    """
    cfg.require_well_conditioned()
    fs = as_fs(ch)
    if fs.L * N > ORACLE_DIM_CAP or fs.K * N > 4 * ORACLE_DIM_CAP:
        raise DimensionCap(f"oracle limited to N*L <= {ORACLE_DIM_CAP}")
    n = np.arange(N)
    G = g_lags(cfg, n[:, None] - n[None, :]).astype(float)
    Gh = np.real(sla.sqrtm(G))
    Gmh = np.linalg.inv(Gh)
    GH = _operator(fs, cfg, N)
    Phi = np.kron(np.eye(fs.K), Gmh) @ GH @ np.kron(np.eye(fs.L), Gmh)
    PhiH = Phi.conj().T
    total = N * cfg.spacing * power
    I = np.eye(fs.K * N)
    scale = 1.0 / (N * LN2)

    def value(K):
        A = I + Phi @ K @ PhiH / noise
        return scale * np.linalg.slogdet(A)[1], A

    def grad(A):
        return scale / noise * (PhiH @ np.linalg.solve(A, Phi))

    c = total / (fs.L * N)
    K = c * np.kron(np.eye(fs.L), G).astype(complex)
    f, A = value(K)
    gK = grad(A)
    step = total / max(np.linalg.norm(gK), 1e-300)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        while True:
            Kn = project_spectraplex(K + step * gK, total)
            fn, An = value(Kn)
            D = Kn - K
            if fn >= f + armijo * np.real(np.vdot(gK, D)) or step < 1e-300:
                break
            step *= 0.5
        if fn < f:
            # step underflowed without an ascent direction: at optimum to precision
            converged = True
            break
        improvement = (fn - f) / max(abs(fn), 1e-300)
        K, f, A = Kn, fn, An
        gK = grad(A)
        history.append(f)
        step *= 2.0
        if improvement < rel_tol:
            converged = True
            break

    Bmh = np.kron(np.eye(fs.L), Gmh)
    S = Bmh @ K @ Bmh
    S = 0.5 * (S + S.conj().T)
    residual = float(np.linalg.norm(K - project_spectraplex(K + gK, total)))
    B = np.kron(np.eye(fs.L), G)
    achieved = np.real(np.trace(B @ S)) / (N * cfg.spacing)
    result = OracleResult(
        objective=float(f),
        iterations=it,
        residual=residual,
        feasibility=abs(achieved - power) / power,
        covariance=S,
        converged=converged,
        history=np.array(history),
    )
    if not converged:
        raise NotConverged(f"no convergence after {max_iter} iterations", result=result)
    return result


@dataclass(frozen=True)
class SzegoRow:
    N: int
    block_value: float
    limit_value: float
    error: float


def szego_convergence(ch, cfg: PulseConfig, Ns, M: int = 4096, *, power: float = 100.0,
                      noise: float = 1.0, max_dim: int = 4096,
                      cond_tol: float = DEFAULT_COND_TOL) -> list[SzegoRow]:
    """Finite-``N`` vs. limiting mutual information of the white input ``S = c I``.

    For each ``N`` compares ``(1/N) sum_l log2(1 + lambda_l / s2)`` over the
    eigenvalues of ``c Phi^H Phi`` with the frequency integral of
    ``sum_j log2(1 + c G_d(f) tau_j(f) / s2)``.
    """
    Ns = list(Ns)
    if Ns != sorted(Ns):
        raise ValueError("N list must be ascending")
    if M < 512:
        raise ValueError("grid must have at least 512 points")
    fs = as_fs(ch)
    if max(Ns) * max(fs.K, fs.L) > max_dim:
        raise DimensionCap(f"N*max(K,L) exceeds cap {max_dim}")
    limit = equal_power_capacity_spectral(fs, power, noise, cfg, M)
    c = power * cfg.spacing / fs.L
    rows = []
    for N in Ns:
        Phi = _phi_matrix(fs, cfg, N, cond_tol)
        lam = np.maximum(np.linalg.eigvalsh(Phi.conj().T @ Phi), 0.0)
        block = float(np.sum(np.log2(1.0 + c * lam / noise)) / N)
        rows.append(SzegoRow(N=N, block_value=block, limit_value=limit, error=abs(block - limit)))
    return rows
