"""Frequency-domain capacity via the block-Toeplitz (Szego) limit.

As ``N`` grows, the block objective becomes an integral over the normalized
frequency ``f_n`` of ``log2 det(I + S(f) Z(f) / s2)``, with power generating
matrix ``S(f) = G_d(f) S_a(f)`` and per-frequency channel Gramian ``Z(f)``.
Aligning ``S`` with the eigenvectors of ``Z`` turns this into joint
space-frequency waterfilling on the eigenmodes ``tau_i(f)``. The input
spectrum is then the eigenspectrum divided by the folded pulse spectrum.

Integrals use the midpoint rule on a uniform grid that excludes ``+-1/2``
(the integrands are periodic); constraint and objective share that grid.
All spectra follow the sign convention of :func:`ftnmimo.channel.link_spectrum`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from ._linalg import hermitize
from .channel import as_fs, spectrum_matrix
from .exceptions import GridTooCoarse, SpectrumZero
from .pulse import PulseConfig, folded_spectrum, midpoint_grid
from .waterfill import WaterfillSolution, spectral_waterfill

__all__ = [
    "SpectralSolution",
    "InputSpectrum",
    "fs_capacity_spectral",
    "equal_power_capacity_spectral",
    "input_eigenspectrum",
    "power_generating_matrix",
    "input_generating_matrix",
    "generating_objective",
    "spectrum_table",
    "write_spectrum_csv",
    "DEFAULT_GRID",
    "DIVERGENCE_FLOOR",
]

DEFAULT_GRID = 1024
MIN_GRID = 64
DIVERGENCE_FLOOR = 1e-6


class InputSpectrum(NamedTuple):
    values: np.ndarray
    divergent: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Optimal eigenspectrum on a frequency grid.

    Attributes
    ----------
    grid : ndarray, shape (M,)
    tau : ndarray, shape (M, L)
        Eigenmodes of ``Z(f)``, sorted descending at each point.
    phi : ndarray, shape (M, L)
        Power allocated to each eigenmode (the eigenspectrum).
    V : ndarray, shape (M, L, L)
        Eigenvectors of ``Z(f)`` matching ``tau``.
    G_d : ndarray, shape (M,)
        Folded pulse spectrum on the grid.
    mu : float
        Common water level is ``1/mu`` (in units of the noise variance).
    """

    grid: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    V: np.ndarray
    G_d: np.ndarray
    mu: float
    noise: float
    config: PulseConfig
    bits_per_channel_use: float
    bits_per_s_per_hz: float
    metadata: dict = field(default_factory=dict)

    @cached_property
    def input_phi(self) -> np.ndarray:
        return input_eigenspectrum(self).values

    @property
    def power_used(self) -> float:
        """``(1/dT) int sum_i phi_i(f) df`` by the midpoint rule."""
        return float(self.phi.sum() / self.grid.size / self.config.spacing)


def _grid_capacity(tau, phi, noise):
    return float(np.sum(np.log2(1.0 + phi * tau / noise)) / tau.shape[0])


def _solve(fs, power, noise, cfg, M):
    grid = midpoint_grid(M)
    spec = spectrum_matrix(fs, grid)
    if not np.any(fs.taps):
        # nothing can be sent: zero rate, no allocation, water level at zero
        wf = WaterfillSolution(mu=math.inf, allocations=np.zeros_like(spec.tau), budget=power * cfg.spacing,
                               budget_used=0.0, kkt_residual=0.0)
        return grid, spec, wf, 0.0
    wf = spectral_waterfill(spec.tau, noise, power * cfg.spacing)
    bits = _grid_capacity(spec.tau, wf.allocations, noise)
    return grid, spec, wf, bits


def fs_capacity_spectral(ch, power: float, noise: float, cfg: PulseConfig, M: int = DEFAULT_GRID, *,
                         refine_tol: float | None = None) -> SpectralSolution:
    """Capacity by joint space-frequency waterfilling on an ``M``-point grid.

    An identically zero channel has capacity 0 (with zero allocation).
    If ``refine_tol`` is given, the capacity is recomputed on ``2M`` points
    and :class:`GridTooCoarse` is raised when the two differ by more than
    ``refine_tol`` bits/channel use.
    """
    cfg.require_well_conditioned()
    if M < MIN_GRID:
        raise ValueError(f"grid must have at least {MIN_GRID} points, got {M}")
    if not (power > 0 and noise > 0):
        raise ValueError("power and noise must be positive")
    fs = as_fs(ch)
    grid, spec, wf, bits = _solve(fs, power, noise, cfg, M)
    if refine_tol is not None:
        fine = _solve(fs, power, noise, cfg, 2 * M)[3]
        if abs(fine - bits) > refine_tol:
            raise GridTooCoarse(
                f"capacity moved by {abs(fine - bits):.3g} bits when refining M={M} -> {2 * M}"
            )
    return SpectralSolution(
        grid=grid,
        tau=spec.tau,
        phi=wf.allocations,
        V=spec.V,
        G_d=folded_spectrum(cfg, grid),
        mu=wf.mu,
        noise=noise,
        config=cfg,
        bits_per_channel_use=bits,
        bits_per_s_per_hz=bits / cfg.bandwidth_factor,
        metadata={"M": M, "K": fs.K, "L": fs.L, "J": fs.J, "power": power, "noise": noise,
                  "snr_db": 10.0 * math.log10(power / noise), "kkt_residual": wf.kkt_residual},
    )


def equal_power_capacity_spectral(ch, power: float, noise: float, cfg: PulseConfig,
                                  M: int = DEFAULT_GRID) -> float:
    """Large-``N`` limit of the white-input (``Sigma_A = c I``) mutual information.

    The generating matrix of ``c I`` is ``c I``, so the integrand is
    ``sum_i log2(1 + c G_d(f) tau_i(f) / s2)`` with ``c = P dT / L``.
    """
    cfg.require_well_conditioned()
    fs = as_fs(ch)
    grid = midpoint_grid(M)
    tau = spectrum_matrix(fs, grid).tau
    c = power * cfg.spacing / fs.L
    Gd = folded_spectrum(cfg, grid)
    return _grid_capacity(tau, c * Gd[:, None], noise)


def input_eigenspectrum(sol: SpectralSolution, cfg: PulseConfig | None = None) -> InputSpectrum:
    """``phi_i(f) / G_d(f)`` and a mask of grid points where ``G_d`` is tiny.

    Raises :class:`SpectrumZero` if ``G_d`` vanishes on the grid.
    """
    Gd = sol.G_d if cfg is None else folded_spectrum(cfg, sol.grid)
    if np.any(Gd <= 0):
        bad = sol.grid[Gd <= 0]
        raise SpectrumZero(f"folded spectrum vanishes at f_n = {bad[:4].tolist()}")
    divergent = Gd < DIVERGENCE_FLOOR * Gd.max()
    return InputSpectrum(values=sol.phi / Gd[:, None], divergent=divergent)


def power_generating_matrix(sol: SpectralSolution, ch=None) -> np.ndarray:
    """``S(f) = V(f) diag(phi(f)) V(f)^H``, shape ``(M, L, L)``."""
    V = sol.V
    return hermitize((V * sol.phi[:, None, :]) @ np.conj(np.swapaxes(V, -1, -2)))


def input_generating_matrix(sol: SpectralSolution, cfg: PulseConfig | None = None) -> np.ndarray:
    """``S_a(f) = S(f) / G_d(f)``; diagonal entries are per-antenna input PSDs."""
    Gd = sol.G_d if cfg is None else folded_spectrum(cfg, sol.grid)
    if np.any(Gd <= 0):
        raise SpectrumZero("folded spectrum vanishes on the grid")
    return power_generating_matrix(sol) / Gd[:, None, None]


def generating_objective(S, Z, noise: float) -> float:
    """Midpoint-rule ``int log2 det(I + S(f) Z(f) / s2) df`` for stacks ``(M, L, L)``."""
    S = np.asarray(S)
    L = S.shape[-1]
    _, logdet = np.linalg.slogdet(np.eye(L) + S @ np.asarray(Z) / noise)
    return float(np.mean(logdet) / math.log(2.0))


def spectrum_table(sol: SpectralSolution):
    """Header and rows of the spectrum dump (one row per grid point)."""
    L = sol.tau.shape[1]
    header = (["f_n"] + [f"tau_{i + 1}" for i in range(L)] + [f"phi_{i + 1}" for i in range(L)]
              + [f"input_phi_{i + 1}" for i in range(L)] + ["G_d"])
    data = np.column_stack([sol.grid, sol.tau, sol.phi, sol.input_phi, sol.G_d])
    return header, data


def write_spectrum_csv(sol: SpectralSolution, path_or_buf=None) -> str:
    """Write the spectrum dump as CSV; returns the text."""
    header, data = spectrum_table(sol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in data:
        w.writerow([repr(float(x)) for x in row])
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text
