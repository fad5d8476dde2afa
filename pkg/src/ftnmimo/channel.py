"""MIMO channel models: flat gain matrices and multi-tap (frequency-selective) tensors.

Sign convention: :func:`link_spectrum` returns ``H~(-f_n)``, i.e.
``sum_i h^i exp(+j 2 pi f_n i)``. Capacities depend only on the eigenvalues
of ``Z~ = H~^H H~`` integrated over a full period, which are invariant under
``f_n -> -f_n``, so every spectrum in this package is indexed by ``f_n`` with
this convention.

Taps are spaced ``delta * T`` apart.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._linalg import eigh_desc, hermitize, normalize_phases
from .exceptions import DimensionMismatch, ParseError

__all__ = [
    "FlatChannel",
    "FsChannel",
    "ChannelSpectrum",
    "realization_rng",
    "gen_flat",
    "gen_fs",
    "as_fs",
    "channel_gramian",
    "link_spectrum",
    "spectrum_matrix",
    "save_channel",
    "load_channel",
]

FORMAT_VERSION = "v1"


@dataclass(frozen=True, eq=False)
class FlatChannel:
    H: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        if H.ndim != 2 or 0 in H.shape:
            raise DimensionMismatch(f"flat channel must be a non-empty K x L matrix, got shape {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel entries must be finite")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def L(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class FsChannel:
    """Tap tensor ``taps[j, k, l] = h^j_{kl}``."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=complex)
        if taps.ndim != 3 or 0 in taps.shape:
            raise DimensionMismatch(f"tap tensor must be non-empty J x K x L, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("channel taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def J(self) -> int:
        return self.taps.shape[0]

    @property
    def K(self) -> int:
        return self.taps.shape[1]

    @property
    def L(self) -> int:
        return self.taps.shape[2]

    def to_flat(self) -> FlatChannel:
        if self.J != 1:
            raise DimensionMismatch(f"only single-tap channels are flat (J={self.J})")
        return FlatChannel(self.taps[0])


def as_fs(ch) -> FsChannel:
    """View a flat channel as a single-tap frequency-selective one."""
    if isinstance(ch, FsChannel):
        return ch
    if isinstance(ch, FlatChannel):
        return FsChannel(ch.H[None])
    raise TypeError(f"expected FlatChannel or FsChannel, got {type(ch).__name__}")


def realization_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for realization ``index`` under master ``seed``.

    Streams are keyed by ``(seed, index)`` only, so results do not depend on
    the order in which realizations are drawn.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _cn(rng, shape, variance):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rng(seed, index):
    if isinstance(seed, np.random.Generator):
        return seed
    return realization_rng(seed, index)


def gen_flat(K: int, L: int, seed, index: int = 0) -> FlatChannel:
    """I.i.d. CN(0, 1) gains. ``seed`` may also be a ready ``Generator``."""
    if K < 1 or L < 1:
        raise ValueError("K and L must be positive")
    return FlatChannel(_cn(_rng(seed, index), (K, L), 1.0))


def gen_fs(K: int, L: int, J: int, seed, index: int = 0, variance: float | None = None) -> FsChannel:
    """I.i.d. CN(0, 1/(L J)) taps unless ``variance`` overrides it."""
    if K < 1 or L < 1 or J < 1:
        raise ValueError("K, L and J must be positive")
    var = 1.0 / (L * J) if variance is None else variance
    return FsChannel(_cn(_rng(seed, index), (J, K, L), var))


def channel_gramian(ch: FlatChannel):
    """``(Z, tau, V_Z)`` with ``Z = H^H H``, ``tau`` descending, ``V_Z`` unitary."""
    H = ch.H
    Z = hermitize(H.conj().T @ H)
    tau, V, _ = eigh_desc(Z, canonical=True)
    return Z, np.maximum(tau, 0.0), V


def link_spectrum(ch, f_n):
    """``H~(-f_n)[k, l] = sum_i h^i_{kl} exp(+j 2 pi f_n i)``.

    Scalar ``f_n`` gives a K x L matrix; an array of frequencies gives
    shape ``(M, K, L)``.
    """
    ch = as_fs(ch)
    f = np.asarray(f_n, dtype=float)
    ph = np.exp(2j * np.pi * f[..., None] * np.arange(ch.J))
    return np.tensordot(ph, ch.taps, axes=(-1, 0))


@dataclass(frozen=True, eq=False)
class ChannelSpectrum:
    """Per-frequency channel matrices on a grid.

    ``Hf[n]`` is ``H~(-f_n)``, ``Z[n] = Hf[n]^H Hf[n]``, ``tau[n]`` its
    eigenvalues (descending) and ``V[n]`` the matching eigenvectors. Modes
    are sorted per point; branches may swap where eigenvalues cross.
    """

    grid: np.ndarray
    Hf: np.ndarray
    Z: np.ndarray
    tau: np.ndarray
    V: np.ndarray


def spectrum_matrix(ch, grid) -> ChannelSpectrum:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if np.any(np.abs(grid) > 0.5 + 1e-12):
        raise ValueError("grid points must lie in [-1/2, 1/2]")
    Hf = link_spectrum(ch, grid)
    Z = hermitize(np.conj(np.swapaxes(Hf, -1, -2)) @ Hf)
    w, V = np.linalg.eigh(Z)
    tau = np.maximum(w[:, ::-1], 0.0)
    V = normalize_phases(V[:, :, ::-1])
    return ChannelSpectrum(grid=grid, Hf=Hf, Z=Z, tau=tau, V=V)


# -- file format -------------------------------------------------------------

_HEADER = re.compile(
    r"^ftn-channel\s+(?P<ver>v\d+)\s*;\s*K\s*=\s*(?P<K>\d+)\s*;\s*L\s*=\s*(?P<L>\d+)\s*;\s*J\s*=\s*(?P<J>\d+)\s*$"
)


def _fmt(z: complex) -> str:
    return f"{float(z.real)!r},{float(z.imag)!r}"


def save_channel(path, ch) -> None:
    """Write ``ch`` as line-oriented text.

    Layout::

        ftn-channel v1; K=2; L=2; J=1
        tap 0
        re,im re,im
        re,im re,im
        end

    Floats use ``repr`` so the round trip is bit-exact.
    """
    fs = as_fs(ch)
    lines = [f"ftn-channel {FORMAT_VERSION}; K={fs.K}; L={fs.L}; J={fs.J}"]
    for j in range(fs.J):
        lines.append(f"tap {j}")
        for row in fs.taps[j]:
            lines.append(" ".join(_fmt(z) for z in row))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_entry(tok: str, lineno: int) -> complex:
    parts = tok.split(",")
    if len(parts) != 2:
        raise ParseError(f"line {lineno}: expected 're,im', got {tok!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad number in {tok!r}") from exc


def load_channel(path):
    """Read a channel file as an :class:`FsChannel` (``.to_flat()`` for J=1).

    Raises :class:`ParseError` for malformed or truncated files and
    :class:`DimensionMismatch` when the header disagrees with the body.
    """
    raw = Path(path).read_text().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("empty channel file")
    m = _HEADER.match(lines[0][1])
    if not m:
        raise ParseError(f"line {lines[0][0]}: bad header {lines[0][1]!r}")
    if m["ver"] != FORMAT_VERSION:
        raise ParseError(f"unsupported channel format version {m['ver']}")
    K, L, J = int(m["K"]), int(m["L"]), int(m["J"])
    if lines[-1][1] != "end":
        raise ParseError("missing 'end' marker (file truncated?)")
    body = lines[1:-1]

    blocks = []
    rows = None
    for lineno, ln in body:
        if ln.startswith("tap"):
            if rows is not None:
                blocks.append((tap_line, rows))
            tap_line, rows = lineno, []
            continue
        if rows is None:
            raise ParseError(f"line {lineno}: data before first 'tap' line")
        rows.append([_parse_entry(t, lineno) for t in ln.split()])
    if rows is not None:
        blocks.append((tap_line, rows))

    if len(blocks) != J:
        raise DimensionMismatch(f"header declares J={J} but file has {len(blocks)} tap blocks")
    taps = np.empty((J, K, L), dtype=complex)
    for j, (lineno, rows) in enumerate(blocks):
        if len(rows) != K or any(len(r) != L for r in rows):
            shape = (len(rows), sorted({len(r) for r in rows}))
            raise DimensionMismatch(f"tap block at line {lineno}: expected {K}x{L} entries, got {shape}")
        taps[j] = rows
    return FsChannel(taps)
