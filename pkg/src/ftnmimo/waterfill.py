"""Waterfilling power allocation.

Three variants share one exact kernel. Each reduces to finding a level ``x``
with ``sum_i (x - t_i)^+ = b`` for thresholds ``t_i`` (``+inf`` marks a
component that can never be active); the left side is piecewise linear and
increasing in ``x``, so sorting the thresholds gives ``x`` in closed form.

* :func:`classic_waterfill`: ``alpha_i = s2 (1/mu - 1/tau_i)^+``.
* :func:`weighted_waterfill`: ``lambda_i = (dT ln2/(mu psi_i) - s2/phi_i)^+``
  under ``(1/(N dT)) sum psi_i lambda_i = P``.
* :func:`spectral_waterfill`: ``phi_i(f) = s2 (1/mu - 1/tau_i(f))^+`` with the
  budget integrated over the frequency grid by the midpoint rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NonPositiveWeight, NoPositiveGain

__all__ = [
    "WaterfillSolution",
    "solve_level",
    "fill",
    "classic_waterfill",
    "weighted_waterfill",
    "spectral_waterfill",
    "waterfill_objective",
]


@dataclass(frozen=True, eq=False)
class WaterfillSolution:
    """Result of a waterfilling solve.

    Attributes
    ----------
    mu : float
        Lagrange multiplier, in the parametrization of the solver that made it.
    allocations : ndarray
        Non-negative powers, same shape as the gains passed in.
    budget : float
        The (weighted) budget that was requested.
    budget_used : float
        The (weighted) sum actually allocated.
    kkt_residual : float
        Largest relative violation of the water-level identity on active
        components or of complementary slackness on inactive ones.
    """

    mu: float
    allocations: np.ndarray
    budget: float
    budget_used: float
    kkt_residual: float

    @property
    def active(self) -> np.ndarray:
        return self.allocations > 0

    @property
    def active_set(self):
        """Indices with strictly positive allocation (tuple per axis for 2-D)."""
        idx = np.nonzero(self.active)
        return idx[0] if self.allocations.ndim == 1 else idx


def _shifted_level(t, budget):
    """Level for thresholds ``t`` already shifted so that ``min(t) == 0``."""
    t = np.sort(t[np.isfinite(t)])
    k = np.arange(1, t.size + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        levels = (budget + np.cumsum(t)) / k
    # first k whose level does not reach the next threshold
    nxt = np.append(t[1:], np.inf)
    k_act = int(np.argmax(levels <= nxt)) + 1
    level = levels[k_act - 1]
    # one correction step against rounding in the cumulative sum
    level += (budget - np.sum(level - t[:k_act])) / k_act
    return float(level)


def _check_thresholds(thresholds, budget):
    t = np.asarray(thresholds, dtype=float)
    fin = np.isfinite(t)
    if not np.any(fin):
        raise NoPositiveGain("no component can receive power")
    if not budget > 0:
        raise ValueError(f"budget must be positive, got {budget!r}")
    return t, float(np.min(t[fin]))


def solve_level(thresholds, budget: float) -> float:
    """Level ``x`` solving ``sum_i (x - t_i)^+ = budget`` exactly.

    ``thresholds`` may contain ``inf`` for components that must stay empty.
    """
    t, t0 = _check_thresholds(thresholds, budget)
    return t0 + _shifted_level(np.ravel(t) - t0, budget)


def fill(thresholds, budget: float):
    """``(level, filled)`` with ``filled_i = (level - t_i)^+`` summing to ``budget``.

    Works relative to the smallest threshold, so the fill is accurate even
    when the thresholds are many orders of magnitude above the budget.
    """
    t, t0 = _check_thresholds(thresholds, budget)
    ts = t - t0
    xs = _shifted_level(np.ravel(ts), budget)
    filled = np.maximum(xs - ts, 0.0)
    filled *= budget / filled.sum()
    return t0 + xs, filled


def _kkt(level, thresholds, filled):
    """Relative KKT violation for ``filled_i = (level - t_i)^+``."""
    fin = np.isfinite(thresholds)
    act = filled > 0
    res = 0.0
    if np.any(act):
        res = float(np.max(np.abs(filled[act] + thresholds[act] - level)))
    inact = fin & ~act
    if np.any(inact):
        res = max(res, float(np.max(np.maximum(level - thresholds[inact], 0.0))))
    return res / level


def _as_gains(gains):
    g = np.asarray(gains, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite")
    return g


def _inv_pos(g):
    out = np.full(g.shape, np.inf)
    pos = g > 0
    with np.errstate(over="ignore"):
        out[pos] = 1.0 / g[pos]
    return out


def classic_waterfill(gains, noise: float, budget: float) -> WaterfillSolution:
    """Spatial waterfilling: maximize ``sum log(1 + alpha_i tau_i / s2)``.

    Parameters
    ----------
    gains : array_like
        Eigen-gains ``tau_i``; entries ``<= 0`` always get zero power.
    noise : float
        Noise variance ``s2``.
    budget : float
        Total power ``sum alpha_i``.

    Returns
    -------
    WaterfillSolution
        ``alpha_i = s2 (1/mu - 1/tau_i)^+`` with ``sum alpha_i = budget``.
    """
    if not noise > 0:
        raise ValueError("noise variance must be positive")
    tau = _as_gains(gains)
    if not np.any(tau > 0):
        raise NoPositiveGain("all gains are zero")
    thr = _inv_pos(tau)
    level, filled = fill(thr, budget / noise)
    alloc = noise * filled
    return WaterfillSolution(
        mu=1.0 / level,
        allocations=alloc,
        budget=float(budget),
        budget_used=float(alloc.sum()),
        kkt_residual=_kkt(level, thr, filled),
    )


def weighted_waterfill(weights, gains, noise: float, delta_t: float, power: float,
                       n_block: int = 1) -> WaterfillSolution:
    """Waterfilling under a weighted power constraint.

    Maximizes ``(1/N) sum log2(1 + lambda_i phi_i / s2)`` subject to
    ``(1/(N dT)) sum psi_i lambda_i = P``. The optimum is
    ``lambda_i = (dT ln2 / (mu psi_i) - s2 / phi_i)^+`` and the returned
    ``mu`` is in that parametrization.

    Parameters
    ----------
    weights : array_like
        Constraint weights ``psi_i`` (all strictly positive).
    gains : array_like
        Eigen-gains ``phi_i >= 0``.
    noise, delta_t, power : float
        ``s2``, symbol spacing ``dT`` and power ``P``.
    n_block : int
        Block length ``N``.
    """
    psi = np.asarray(weights, dtype=float)
    phi = _as_gains(gains)
    if psi.shape != phi.shape:
        raise ValueError("weights and gains must have the same shape")
    if not np.all(psi > 0):
        raise NonPositiveWeight("all weights psi_i must be strictly positive")
    if not noise > 0:
        raise ValueError("noise variance must be positive")
    if not np.any(phi > 0):
        raise NoPositiveGain("all gains are zero")
    # psi_i lambda_i = (x - s2 psi_i / phi_i)^+ with x = dT ln2 / mu
    with np.errstate(over="ignore"):
        thr = noise * psi * _inv_pos(phi)
    target = n_block * delta_t * power
    level, filled = fill(thr, target)
    alloc = filled / psi
    return WaterfillSolution(
        mu=delta_t * math.log(2.0) / level,
        allocations=alloc,
        budget=float(power),
        budget_used=float(np.sum(psi * alloc) / (n_block * delta_t)),
        kkt_residual=_kkt(level, thr, filled),
    )


def spectral_waterfill(modes, noise: float, budget: float) -> WaterfillSolution:
    """Joint space-frequency waterfilling on a uniform grid.

    ``modes`` has shape ``(M, L)``: eigenmode ``tau_i`` at each of ``M``
    midpoint-grid frequencies. The constraint ``int sum_i phi_i(f) df =
    budget`` is discretized as ``(1/M) sum_{n,i} phi_i(f_n)``. A single level
    ``1/mu`` is shared by every eigenchannel and frequency.
    """
    if not noise > 0:
        raise ValueError("noise variance must be positive")
    tau = _as_gains(modes)
    if tau.ndim == 1:
        tau = tau[:, None]
    if np.any(tau < 0):
        raise ValueError("eigenmodes must be non-negative")
    if not np.any(tau > 0):
        raise NoPositiveGain("all eigenmodes vanish on the grid")
    M = tau.shape[0]
    thr = _inv_pos(tau)
    level, filled = fill(thr, M * budget / noise)
    alloc = noise * filled
    return WaterfillSolution(
        mu=1.0 / level,
        allocations=alloc,
        budget=float(budget),
        budget_used=float(alloc.sum() / M),
        kkt_residual=_kkt(level, thr, filled),
    )


def waterfill_objective(allocations, gains, noise: float) -> float:
    """``sum log2(1 + p_i g_i / s2)`` in bits."""
    return float(np.sum(np.log2(1.0 + np.asarray(allocations) * np.asarray(gains) / noise)))
