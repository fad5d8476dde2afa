"""Raised-cosine pulse family used for FTN signaling.

All frequencies passed to :func:`rc_frequency_response` are in Hz; the folded
spectrum is a function of the normalized frequency ``f_n`` (cycles per
``delta * T`` seconds) and is periodic with period 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import MazoRegion

__all__ = [
    "PulseConfig",
    "FoldedSpectrum",
    "rc_frequency_response",
    "rc_time_sample",
    "g_lags",
    "g_samples",
    "folded_spectrum",
    "folded_spectrum_on_grid",
    "midpoint_grid",
]

DEFAULT_SYMBOL_PERIOD = 0.01


@dataclass(frozen=True)
class PulseConfig:
    """Parameters of a raised-cosine matched-filter response.

    Parameters
    ----------
    delta : float
        Acceleration factor in (0, 1]; symbols are sent every ``delta * T``.
    beta : float
        Roll-off factor in [0, 1].
    T : float
        Nyquist symbol period in seconds.
    """

    delta: float = 1.0
    beta: float = 0.0
    T: float = DEFAULT_SYMBOL_PERIOD

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"symbol period T must be positive, got {self.T!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"roll-off beta must lie in [0, 1], got {self.beta!r}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"acceleration delta must lie in (0, 1], got {self.delta!r}")

    @property
    def spacing(self) -> float:
        """Time between consecutive symbols, ``delta * T``."""
        return self.delta * self.T

    @property
    def bandwidth_factor(self) -> float:
        """``delta * (1 + beta)``; below 1 the folded spectrum has zero bands."""
        return self.delta * (1.0 + self.beta)

    @property
    def well_conditioned(self) -> bool:
        # 1e-12 slack so that e.g. delta=1/(1+beta) typed as a decimal still counts
        return self.bandwidth_factor >= 1.0 - 1e-12

    def require_well_conditioned(self):
        if not self.well_conditioned:
            raise MazoRegion(
                f"delta*(1+beta) = {self.bandwidth_factor:.6g} < 1 is not supported"
            )


def rc_frequency_response(f, cfg: PulseConfig):
    """Raised-cosine spectrum ``G(f)`` in seconds (``G(0) = T``).

    For ``beta = 0`` the spectrum jumps at ``|f| = 1/(2T)``; the value there
    is ``T/2``, the point the inverse transform converges to, so that the
    folded spectrum stays flat at Nyquist rate.
    """
    T, beta = cfg.T, cfg.beta
    a = np.abs(np.asarray(f, dtype=float))
    lo = (1.0 - beta) / (2.0 * T)
    hi = (1.0 + beta) / (2.0 * T)
    out = np.where(a < lo, T, 0.0)
    band = (a >= lo) & (a <= hi)
    if hi > lo:
        roll = 0.5 * T * (1.0 + np.cos(np.pi * T / beta * (a[band] - lo)))
        out[band] = roll
    else:
        out[band] = 0.5 * T
    return out[()] if out.ndim == 0 else out


def _rc_normalized(x, beta):
    u = np.abs(2.0 * beta * x)
    shaping = 0.5 * np.pi * np.sinc(0.5 * (1.0 - u)) / (1.0 + u)
    return np.sinc(x) * shaping


def rc_time_sample(t, cfg: PulseConfig):
    """Raised-cosine impulse response ``g(t)`` with ``g(0) = 1``.

    The usual ``cos(pi*beta*x) / (1 - (2*beta*x)**2)`` factor has removable
    singularities at ``t = +-T/(2*beta)``. With ``u = |2*beta*x|`` it equals
    ``(pi/2) * sinc((1 - u)/2) / (1 + u)``, which is smooth for ``u >= 0`` and
    takes the limit value ``pi/4`` at ``u = 1`` without a special case.
    """
    out = _rc_normalized(np.asarray(t, dtype=float) / cfg.T, cfg.beta)
    return out[()] if out.ndim == 0 else out


def g_lags(cfg: PulseConfig, lags):
    """``g[n] = g(n * delta * T)`` for integer lags ``n``."""
    x = np.asarray(lags) * cfg.delta
    out = _rc_normalized(x, cfg.beta)
    # Nyquist zero crossings exactly, not up to sin(k*pi) rounding
    return np.where((x == np.round(x)) & (x != 0), 0.0, np.where(x == 0, 1.0, out))


def g_samples(cfg: PulseConfig, N: int) -> np.ndarray:
    """Samples ``g[n]`` for ``n = -(N-1), ..., N-1`` (length ``2N - 1``)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    half = g_lags(cfg, np.arange(N))
    return np.concatenate([half[:0:-1], half])


def _alias_range(cfg: PulseConfig) -> np.ndarray:
    m = int(math.ceil((1.0 + cfg.beta) * cfg.delta)) + 1
    return np.arange(-m, m + 1)


def folded_spectrum(cfg: PulseConfig, f_n):
    """Folded spectrum ``G_d(f_n) = (1/(delta T)) sum_m G((f_n - m)/(delta T))``.

    ``G`` has compact support, so the alias sum is evaluated exactly over the
    few shifts ``m`` that can contribute.
    """
    f = np.asarray(f_n, dtype=float)
    # reduce into [-1/2, 1/2) so the fixed alias range always covers the support
    r = f - np.floor(f + 0.5)
    m = _alias_range(cfg)
    vals = rc_frequency_response((r[..., None] - m) / cfg.spacing, cfg)
    out = vals.sum(axis=-1) / cfg.spacing
    return out[()] if out.ndim == 0 else out


def midpoint_grid(M: int) -> np.ndarray:
    """Uniform midpoint grid of ``M`` points on (-1/2, 1/2), endpoints excluded."""
    if M < 1:
        raise ValueError("grid size must be positive")
    return -0.5 + (np.arange(M) + 0.5) / M


@dataclass(frozen=True)
class FoldedSpectrum:
    grid: np.ndarray
    values: np.ndarray
    config: PulseConfig


def folded_spectrum_on_grid(cfg: PulseConfig, M: int, *, endpoints: bool = True) -> FoldedSpectrum:
    """Sample ``G_d`` on ``M`` uniformly spaced points.

    With ``endpoints=True`` the grid is ``linspace(-1/2, 1/2, M)`` (both
    periodic copies of the boundary included); otherwise the midpoint grid.
    """
    grid = np.linspace(-0.5, 0.5, M) if endpoints else midpoint_grid(M)
    return FoldedSpectrum(grid=grid, values=folded_spectrum(cfg, grid), config=cfg)
