"""FTN Gram matrices and their spectral algebra.

``G[n, m] = g[n - m]`` collects the matched-filter pulse correlations at
symbol spacing ``delta * T``; ``G^j[n, m] = g[n - m - j]`` is its j-shifted
companion used by multi-tap channels.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import IllConditioned
from .pulse import PulseConfig, g_lags

__all__ = [
    "GramMatrix",
    "ShiftedGram",
    "build_gram",
    "build_shifted_gram",
    "spectral_decompose",
    "inverse",
    "inv_sqrt",
    "DEFAULT_COND_TOL",
]

DEFAULT_COND_TOL = 1e-12


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShiftedGram:
    N: int
    j: int
    entries: np.ndarray
    config: PulseConfig


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Real symmetric Toeplitz Gram matrix with unit diagonal."""

    N: int
    entries: np.ndarray
    config: PulseConfig

    @cached_property
    def eig(self):
        """``(V_G, lambda_G)`` with eigenvalues sorted descending."""
        w, V = np.linalg.eigh(self.entries)
        return _frozen(V[:, ::-1].copy()), _frozen(w[::-1].copy())

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eig[1][-1])

    @property
    def condition_number(self) -> float:
        w = self.eig[1]
        return float(w[0] / w[-1]) if w[-1] > 0 else np.inf


@lru_cache(maxsize=64)
def build_gram(cfg: PulseConfig, N: int) -> GramMatrix:
    """Toeplitz Gram matrix for ``N`` symbols; cached per ``(cfg, N)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    col = g_lags(cfg, np.arange(N))
    return GramMatrix(N=N, entries=_frozen(toeplitz(col)), config=cfg)


@lru_cache(maxsize=128)
def build_shifted_gram(cfg: PulseConfig, N: int, j: int) -> ShiftedGram:
    if j < 0:
        raise ValueError("shift j must be non-negative")
    if N < 1:
        raise ValueError("N must be at least 1")
    n = np.arange(N)
    col = g_lags(cfg, n - j)
    row = g_lags(cfg, -n - j)
    return ShiftedGram(N=N, j=j, entries=_frozen(toeplitz(col, row)), config=cfg)


def spectral_decompose(G: GramMatrix):
    """Return ``(V_G, lambda_G)`` such that ``G = V_G diag(lambda_G) V_G^T``."""
    return G.eig


def _checked_eig(G: GramMatrix, cond_tol: float):
    V, w = G.eig
    if not w[-1] >= cond_tol * w[0]:
        raise IllConditioned(
            f"Gram matrix (N={G.N}, delta={G.config.delta}, beta={G.config.beta}) has "
            f"min/max eigenvalue ratio {w[-1] / w[0]:.3g} below {cond_tol:g}"
        )
    return V, w


def inverse(G: GramMatrix, cond_tol: float = DEFAULT_COND_TOL) -> np.ndarray:
    """``G^{-1}`` through the eigendecomposition.

    Raises :class:`IllConditioned` if the smallest eigenvalue is below
    ``cond_tol`` times the largest. Small eigenvalues are never clamped.
    """
    V, w = _checked_eig(G, cond_tol)
    return (V / w) @ V.T


def inv_sqrt(G: GramMatrix, cond_tol: float = DEFAULT_COND_TOL) -> np.ndarray:
    """Symmetric inverse square root ``G^{-1/2}``."""
    V, w = _checked_eig(G, cond_tol)
    return (V / np.sqrt(w)) @ V.T


def sqrtm(G: GramMatrix, cond_tol: float = DEFAULT_COND_TOL) -> np.ndarray:
    V, w = _checked_eig(G, cond_tol)
    return (V * np.sqrt(w)) @ V.T
