"""Block-matrix (time-domain) capacity of MIMO FTN signaling.

Units: ``power`` is the transmit power ``P`` and ``noise`` the noise PSD
``s2``. A block of ``N`` symbols per antenna carries energy ``N P delta T``,
so the distinct per-stream allocations of the flat solution sum to
``P delta T``. Capacities are in bits per channel use; dividing by
``delta (1 + beta)`` gives bit/s/Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._linalg import eigh_desc, hermitize, logdet_identity_plus
from .channel import FlatChannel, FsChannel, as_fs, channel_gramian
from .exceptions import DimensionCap, DimensionMismatch, NotPSD
from .gram import (
    DEFAULT_COND_TOL,
    GramMatrix,
    build_gram,
    build_shifted_gram,
    inv_sqrt,
    inverse,
)
from .pulse import PulseConfig
from .waterfill import classic_waterfill, weighted_waterfill

__all__ = [
    "CapacityReport",
    "OptimalCovariance",
    "FsSystem",
    "MutualInformation",
    "flat_capacity",
    "flat_capacity_blockform",
    "fs_system",
    "fs_capacity_time",
    "mutual_info_given_cov",
    "equal_power_capacity",
    "spectral_efficiency",
    "optimal_fs_covariance",
    "equal_power_scale",
    "channel_block_matrix",
    "DEFAULT_BLOCKFORM_CAP",
    "DEFAULT_DIM_CAP",
]

DEFAULT_BLOCKFORM_CAP = 64
DEFAULT_DIM_CAP = 4096
LN2 = math.log(2.0)


def spectral_efficiency(bits_per_use: float, cfg: PulseConfig) -> float:
    """Convert bits/channel use to bit/s/Hz: ``C / (delta (1 + beta))``."""
    return bits_per_use / cfg.bandwidth_factor


@dataclass(frozen=True, eq=False)
class OptimalCovariance:
    """Optimal input covariance ``(V_Z diag(alpha) V_Z^H) kron G^{-1}``.

    Only the spatial factor is stored; the temporal factor is the inverse of
    the Gram matrix for whatever block length is requested.
    """

    kron_left: np.ndarray
    config: PulseConfig

    def gram(self, N: int) -> GramMatrix:
        return build_gram(self.config, N)

    def assemble(self, N: int, cond_tol: float = DEFAULT_COND_TOL) -> np.ndarray:
        return np.kron(self.kron_left, inverse(self.gram(N), cond_tol))

    def generating_matrix(self, G_d):
        """Per-frequency generating matrix ``kron_left / G_d(f)`` (shape ``(M, L, L)``)."""
        G_d = np.asarray(G_d, dtype=float)
        return self.kron_left[None] / G_d[:, None, None]


@dataclass(frozen=True, eq=False)
class CapacityReport:
    """Capacity and the optimal input that achieves it.

    ``allocations`` holds the distinct per-stream powers for flat channels
    and the per-eigenvector ``lambda*_i`` for frequency-selective ones;
    ``eigenvalues`` the matching gains (``tau_i`` or ``phi_i``).
    """

    bits_per_channel_use: float
    bits_per_s_per_hz: float
    allocations: np.ndarray
    water_level: float
    eigenvalues: np.ndarray
    metadata: dict = field(default_factory=dict)
    weights: np.ndarray | None = None
    covariance: OptimalCovariance | None = None
    power_used: float | None = None


def _metadata(cfg, power, noise, **extra):
    md = {
        "snr": power / noise,
        "snr_db": 10.0 * math.log10(power / noise),
        "effective_snr": power * cfg.spacing / noise,
        "power": power,
        "noise": noise,
        "delta": cfg.delta,
        "beta": cfg.beta,
        "T": cfg.T,
    }
    md.update(extra)
    return md


def _check_power(power, noise):
    if not power > 0:
        raise ValueError(f"power must be positive, got {power!r}")
    if not noise > 0:
        raise ValueError(f"noise must be positive, got {noise!r}")


def flat_capacity(ch: FlatChannel, power: float, noise: float, cfg: PulseConfig) -> CapacityReport:
    """Closed-form capacity of a flat MIMO channel with FTN signaling.

    Waterfilling over the eigenvalues of ``H^H H`` with budget ``P delta T``;
    the pulse only enters through that budget and the bandwidth factor.
    """
    cfg.require_well_conditioned()
    _check_power(power, noise)
    if isinstance(ch, FsChannel):
        ch = ch.to_flat()
    _, tau, V = channel_gramian(ch)
    wf = classic_waterfill(tau, noise, power * cfg.spacing)
    alpha = wf.allocations
    bits = float(np.sum(np.log2(1.0 + alpha * tau / noise)))
    left = hermitize((V * alpha) @ V.conj().T)
    return CapacityReport(
        bits_per_channel_use=bits,
        bits_per_s_per_hz=spectral_efficiency(bits, cfg),
        allocations=alpha,
        water_level=wf.mu,
        eigenvalues=tau,
        metadata=_metadata(cfg, power, noise, K=ch.K, L=ch.L, J=1),
        covariance=OptimalCovariance(kron_left=left, config=cfg),
        power_used=wf.budget_used / cfg.spacing,
    )


def flat_capacity_blockform(ch: FlatChannel, power: float, noise: float, cfg: PulseConfig, N: int,
                            *, via_covariance: bool = False,
                            max_n: int = DEFAULT_BLOCKFORM_CAP,
                            cond_tol: float = DEFAULT_COND_TOL) -> float:
    """Evaluate ``(1/N) log2 det(I + K W / s2)`` at the optimal ``K`` explicitly.

    ``W = (H^H H) kron I_N``. By default ``K = (V_Z diag(alpha) V_Z^H) kron I_N``;
    with ``via_covariance=True`` it is rebuilt as ``(I_L kron G) Sigma_A`` from
    the assembled optimal covariance, which requires inverting ``G``.
    """
    if N > max_n:
        raise DimensionCap(f"block form limited to N <= {max_n}, got {N}")
    if N < 1:
        raise ValueError("N must be at least 1")
    if isinstance(ch, FsChannel):
        ch = ch.to_flat()
    rep = flat_capacity(ch, power, noise, cfg)
    Z, _, _ = channel_gramian(ch)
    L = ch.L
    I_N = np.eye(N)
    if via_covariance:
        G = build_gram(cfg, N)
        Kbar = np.kron(np.eye(L), G.entries) @ rep.covariance.assemble(N, cond_tol)
    else:
        Kbar = np.kron(rep.covariance.kron_left, I_N)
    Zh = _psd_sqrt(Z)
    Wh = np.kron(Zh, I_N)
    A = np.eye(L * N) + Wh @ Kbar @ Wh / noise
    return logdet_identity_plus(A) / (N * LN2)


def _psd_sqrt(A):
    w, V = np.linalg.eigh(hermitize(A))
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.conj().T


# -- frequency-selective channels ---------------------------------------------


def _check_fs_dims(fs: FsChannel, N: int, max_dim: int):
    if N < fs.J:
        raise ValueError(f"block length N={N} must be at least the tap count J={fs.J}")
    if N * max(fs.K, fs.L) > max_dim:
        raise DimensionCap(f"N*max(K,L) = {N * max(fs.K, fs.L)} exceeds cap {max_dim}")


def channel_block_matrix(fs: FsChannel, cfg: PulseConfig, N: int) -> np.ndarray:
    """``G_H = sum_j H^j kron G^j`` (``KN x LN``)."""
    GH = np.zeros((fs.K * N, fs.L * N), dtype=complex)
    for j in range(fs.J):
        Hj = fs.taps[j]
        if np.any(Hj):
            GH += np.kron(Hj, build_shifted_gram(cfg, N, j).entries)
    return GH


def _phi_matrix(fs: FsChannel, cfg: PulseConfig, N: int, cond_tol: float) -> np.ndarray:
    """``Phi = (I_K kron G^{-1/2}) G_H``."""
    Gm = inv_sqrt(build_gram(cfg, N), cond_tol)
    GH = channel_block_matrix(fs, cfg, N)
    for k in range(fs.K):
        rows = slice(k * N, (k + 1) * N)
        GH[rows] = Gm @ GH[rows]
    return GH


@dataclass(frozen=True, eq=False)
class FsSystem:
    """SNR-independent eigen-structure of one channel at block length ``N``.

    Decompositions are computed on first access and cached:

    * ``phi``, ``U``: eigenvalues (descending) and eigenvectors of
      ``Phi^H Phi``, with a canonical basis inside degenerate eigenspaces;
    * ``psi``: diagonal of ``U^H (I_L kron G) U``;
    * ``whitened``: eigen-pairs of ``B^{-1/2} Phi^H Phi B^{-1/2}``.
    """

    channel: FsChannel
    config: PulseConfig
    N: int
    Phi: np.ndarray
    cond_tol: float = DEFAULT_COND_TOL

    @cached_property
    def gram(self) -> GramMatrix:
        return build_gram(self.config, self.N)

    @cached_property
    def _eig(self):
        phi, U, degenerate = eigh_desc(hermitize(self.Phi.conj().T @ self.Phi), canonical=True)
        return np.maximum(phi, 0.0), U, degenerate

    @property
    def phi(self) -> np.ndarray:
        return self._eig[0]

    @property
    def U(self) -> np.ndarray:
        return self._eig[1]

    @property
    def degenerate(self) -> bool:
        return self._eig[2]

    @cached_property
    def psi(self) -> np.ndarray:
        U, N, G = self.U, self.N, self.gram.entries
        GU = np.empty_like(U)
        for l in range(self.channel.L):
            rows = slice(l * N, (l + 1) * N)
            GU[rows] = G @ U[rows]
        return np.real(np.sum(U.conj() * GU, axis=0))

    @cached_property
    def whitened(self):
        """``(w, V, B^{-1/2}, degenerate)`` for ``B^{-1/2} Phi^H Phi B^{-1/2}``, ``B = I_L kron G``.

        In these coordinates the power constraint is a plain trace, so
        classic waterfilling on ``w`` is the exact finite-``N`` optimum.
        """
        Bm = np.kron(np.eye(self.channel.L), inv_sqrt(self.gram, self.cond_tol))
        Pw = self.Phi @ Bm
        w, V, degenerate = eigh_desc(hermitize(Pw.conj().T @ Pw), canonical=True)
        return np.maximum(w, 0.0), V, Bm, degenerate


def fs_system(ch, cfg: PulseConfig, N: int, *, max_dim: int = DEFAULT_DIM_CAP,
              cond_tol: float = DEFAULT_COND_TOL) -> FsSystem:
    cfg.require_well_conditioned()
    fs = as_fs(ch)
    _check_fs_dims(fs, N, max_dim)
    return FsSystem(channel=fs, config=cfg, N=N, Phi=_phi_matrix(fs, cfg, N, cond_tol), cond_tol=cond_tol)


def fs_capacity_time(ch, power: float, noise: float, cfg: PulseConfig, N: int, *,
                     system: FsSystem | None = None, method: str = "weighted",
                     max_dim: int = DEFAULT_DIM_CAP,
                     cond_tol: float = DEFAULT_COND_TOL) -> CapacityReport:
    """Finite-``N`` capacity of a frequency-selective MIMO FTN channel.

    ``method="weighted"`` diagonalizes ``Phi^H Phi``, weights each
    eigen-direction by its share ``psi_i`` of the FTN power constraint and
    waterfills with :func:`weighted_waterfill`. The input is restricted to
    the eigenvectors of ``Phi^H Phi``, so for ``delta < 1`` this is a
    feasible rate that can sit below the block optimum at finite ``N``.

    ``method="exact"`` waterfills on the eigenvalues of
    ``B^{-1/2} Phi^H Phi B^{-1/2}`` (``B = I_L kron G``), where the
    constraint is a plain trace; this is the maximum of the block mutual
    information over all admissible covariances.

    Pass a precomputed ``system`` to reuse eigendecompositions across SNR
    points.
    """
    _check_power(power, noise)
    if method not in ("weighted", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if system is None:
        system = fs_system(ch, cfg, N, max_dim=max_dim, cond_tol=cond_tol)
    elif system.N != N or system.config != cfg:
        raise ValueError("precomputed system does not match (cfg, N)")
    fs = system.channel
    if method == "weighted":
        wf = weighted_waterfill(system.psi, system.phi, noise, cfg.spacing, power, n_block=N)
        gains, weights, used = system.phi, system.psi, wf.budget_used
        degenerate = system.degenerate
    else:
        w, _, _, degenerate = system.whitened
        wf = classic_waterfill(w, noise, N * cfg.spacing * power)
        gains, weights, used = w, None, wf.budget_used / (N * cfg.spacing)
    lam = wf.allocations
    bits = float(np.sum(np.log2(1.0 + lam * gains / noise)) / N)
    return CapacityReport(
        bits_per_channel_use=bits,
        bits_per_s_per_hz=spectral_efficiency(bits, cfg),
        allocations=lam,
        water_level=wf.mu,
        eigenvalues=gains,
        weights=weights,
        metadata=_metadata(cfg, power, noise, K=fs.K, L=fs.L, J=fs.J, N=N, method=method,
                           degenerate=degenerate),
        power_used=used,
    )


def optimal_fs_covariance(report: CapacityReport, system: FsSystem) -> np.ndarray:
    """Assemble the input covariance ``Sigma_A`` of a time-domain solution.

    ``U diag(lambda*) U^H`` for the weighted method and
    ``B^{-1/2} V diag(alpha) V^H B^{-1/2}`` for the exact one.
    """
    if report.metadata.get("method") == "exact":
        _, V, Bm, _ = system.whitened
        K = (V * report.allocations) @ V.conj().T
        return hermitize(Bm @ K @ Bm)
    U = system.U
    return hermitize((U * report.allocations) @ U.conj().T)


@dataclass(frozen=True)
class MutualInformation:
    bits: float
    power: float


def mutual_info_given_cov(sigma_a, ch, cfg: PulseConfig, N: int, noise: float, *,
                          system: FsSystem | None = None,
                          cond_tol: float = DEFAULT_COND_TOL) -> MutualInformation:
    """Mutual information (bits/channel use) of a given input covariance.

    Evaluates ``(1/N) log2 det(I + G_H Sigma_A G_H^H (I_K kron G^{-1}) / s2)``
    as ``(1/N) log2 det(I + Phi Sigma_A Phi^H / s2)`` and reports the power
    ``(1/(N delta T)) tr((I_L kron G) Sigma_A)``.
    """
    cfg.require_well_conditioned()
    fs = as_fs(ch)
    S = np.asarray(sigma_a)
    n = fs.L * N
    if S.shape != (n, n):
        raise DimensionMismatch(f"covariance must be {n}x{n}, got {S.shape}")
    S = hermitize(S)
    w = np.linalg.eigvalsh(S)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[0] < -1e-8 * max(scale, np.finfo(float).tiny):
        raise NotPSD(f"covariance has eigenvalue {w[0]:.3g} (scale {scale:.3g})")
    Phi = system.Phi if system is not None else _phi_matrix(fs, cfg, N, cond_tol)
    A = np.eye(fs.K * N) + Phi @ S @ Phi.conj().T / noise
    bits = logdet_identity_plus(A) / (N * LN2)
    G = build_gram(cfg, N).entries
    tr = sum(np.trace(G @ S[l * N:(l + 1) * N, l * N:(l + 1) * N]).real for l in range(fs.L))
    return MutualInformation(bits=bits, power=float(tr / (N * cfg.spacing)))


def equal_power_scale(power: float, cfg: PulseConfig, L: int) -> float:
    """``c`` with ``(1/(N dT)) tr((I_L kron G) c I) = P``; ``g[0] = 1`` gives ``P dT / L``."""
    return power * cfg.spacing / L


def equal_power_capacity(ch, power: float, noise: float, cfg: PulseConfig, N: int, *,
                         system: FsSystem | None = None, max_dim: int = DEFAULT_DIM_CAP,
                         cond_tol: float = DEFAULT_COND_TOL) -> float:
    """Mutual information of the white input ``Sigma_A = c I`` (bits/channel use).

    With ``Sigma_A = c I`` the log-determinant reduces to the eigenvalues of
    ``Phi^H Phi``. A precomputed ``system`` is reused if its eigenvalues are
    already available; otherwise only eigenvalues are computed.
    """
    _check_power(power, noise)
    if system is None:
        system = fs_system(ch, cfg, N, max_dim=max_dim, cond_tol=cond_tol)
    if "_eig" in system.__dict__:
        phi = system.phi
    else:
        Phi = system.Phi
        phi = np.maximum(np.linalg.eigvalsh(hermitize(Phi.conj().T @ Phi)), 0.0)
    c = equal_power_scale(power, cfg, system.channel.L)
    return float(np.sum(np.log2(1.0 + c * phi / noise)) / N)
