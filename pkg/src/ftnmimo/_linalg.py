"""Small dense linear-algebra helpers shared by the capacity engines."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

LOG_FLOOR = 1e-300


def hermitize(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2).conj())


def normalize_phases(V):
    """Rotate each column so its first non-negligible entry is real positive.

    Works on a single matrix or a stack ``(..., n, k)``.
    """
    V = np.array(V, copy=True)
    mag = np.abs(V)
    thresh = 1e-8 * mag.max(axis=-2, keepdims=True)
    first = np.argmax(mag > thresh, axis=-2)
    pivot = np.take_along_axis(V, first[..., None, :], axis=-2)
    pm = np.abs(pivot)
    phase = np.where(pm > 0, pivot / np.where(pm > 0, pm, 1.0), 1.0)
    return V * phase.conj()


def eigh_desc(A, *, canonical=False, degen_tol=1e-10):
    """Hermitian eigendecomposition with eigenvalues sorted descending.

    With ``canonical=True`` each eigenspace whose eigenvalues agree to within
    ``degen_tol * max|w|`` gets a basis that depends only on the subspace:
    the basis is rotated by the unitary factor of a column-pivoted QR of its
    conjugate transpose, then phase-normalized. Returns ``(w, V, degenerate)``
    where ``degenerate`` reports whether any cluster had size > 1.
    """
    w, V = np.linalg.eigh(hermitize(A))
    w, V = w[::-1], V[:, ::-1]
    degenerate = False
    if canonical and w.size > 1:
        scale = max(np.abs(w).max(), np.finfo(float).tiny)
        breaks = np.flatnonzero(np.abs(np.diff(w)) > degen_tol * scale) + 1
        starts = np.concatenate([[0], breaks])
        stops = np.concatenate([breaks, [w.size]])
        V = np.array(V, dtype=complex if np.iscomplexobj(V) else float)
        for a, b in zip(starts, stops):
            if b - a > 1:
                degenerate = True
                B = V[:, a:b]
                Q, _, _ = sla.qr(B.conj().T, pivoting=True, mode="economic")
                V[:, a:b] = B @ Q
    return w, normalize_phases(V), degenerate


def logdet_identity_plus(A):
    """``log det(A)`` in nats for ``A = I + (Hermitian PSD)``.

    Cholesky on the Hermitian part; if that fails (roundoff pushed an
    eigenvalue to <= 0) fall back to an eigenvalue sum with an underflow clamp.
    """
    A = hermitize(A)
    try:
        c = sla.cholesky(A, lower=True, check_finite=False)
        return 2.0 * float(np.sum(np.log(np.abs(np.diag(c)))))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(A)
        return float(np.sum(np.log(np.maximum(w, LOG_FLOOR))))
