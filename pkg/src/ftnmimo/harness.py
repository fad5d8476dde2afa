"""Seeded Monte Carlo experiments: capacity sweeps, spectrum dumps and self-checks.

SNR is ``P / s2`` with ``s2 = 1``. Realization ``i`` of a sweep draws its
channel from the substream ``(seed, i)``; the same channel set is reused for
every SNR point and every ``delta`` in the sweep. Realizations may run on
several threads, but results are reduced in index order, so output bytes do
not depend on ``workers``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .capacity_freq import equal_power_capacity_spectral, fs_capacity_spectral, write_spectrum_csv
from .capacity_time import (
    equal_power_capacity,
    flat_capacity,
    flat_capacity_blockform,
    fs_capacity_time,
    fs_system,
)
from .channel import FsChannel, gen_flat, gen_fs, load_channel
from .exceptions import FTNError, IllConditioned, MazoRegion
from .oracle import brute_force_capacity, szego_convergence
from .pulse import PulseConfig

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "SweepError",
    "SWEEP_COLUMNS",
    "parse_snr_grid",
    "parse_float_list",
    "read_config_file",
    "run_sweep",
    "run_spectrum",
    "run_validate",
    "DEFAULT_TOLERANCES",
]

SCHEMA_VERSION = "ftnmimo-sweep/1"
VALIDATE_SCHEMA = "ftnmimo-validate/1"
SWEEP_COLUMNS = [
    "snr_db",
    "delta",
    "beta",
    "mean_capacity_bits_s_hz",
    "stderr",
    "mean_equal_power_bits_s_hz",
    "stderr_equal_power",
    "R",
    "seed",
]
MODES = ("flat", "fs", "spectrum", "validate")
ENGINES = ("spectral", "time")
FS_METHODS = ("weighted", "exact")


class SweepError(FTNError):
    """A realization failed; carries its index and the master seed."""

    def __init__(self, message, index: int, seed: int):
        super().__init__(f"realization {index} (seed {seed}): {message}")
        self.index = index
        self.seed = seed


def parse_snr_grid(text) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive of ``b``), a comma list, or a single value."""
    if isinstance(text, (int, float)):
        return (float(text),)
    if not isinstance(text, str):
        return tuple(float(x) for x in text)
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"SNR grid must be 'start:stop:step' with step > 0, got {text!r}")
        a, b, step = parts
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError(f"empty SNR grid {text!r}")
        return tuple(round(a + i * step, 12) for i in range(n))
    return parse_float_list(text)


def parse_float_list(text) -> tuple[float, ...]:
    if isinstance(text, (int, float)):
        return (float(text),)
    if not isinstance(text, str):
        return tuple(float(x) for x in text)
    vals = tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    if not vals:
        raise ValueError("empty list")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; echoed into output metadata.

    ``engine`` selects how frequency-selective capacity is computed: the
    frequency-grid solution (``"spectral"``, the large-``N`` limit) or the
    ``N``-block solution (``"time"``, with ``fs_method`` choosing the
    solver). Flat channels always use the closed form.
    """

    mode: str = "flat"
    K: int = 2
    L: int = 2
    J: int = 1
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    deltas: tuple = (1.0,)
    beta: float = 0.5
    T: float = 0.01
    N: int = 256
    M: int = 1024
    realizations: int = 100
    seed: int = 0
    engine: str = "spectral"
    fs_method: str = "weighted"
    workers: int = 1
    out: str | None = None
    channel_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_db", parse_snr_grid(self.snr_db))
        object.__setattr__(self, "deltas", parse_float_list(self.deltas))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.fs_method not in FS_METHODS:
            raise ValueError(f"fs_method must be one of {FS_METHODS}, got {self.fs_method!r}")
        for name in ("K", "L", "J", "N", "M", "realizations", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode == "flat" and self.J != 1:
            raise ValueError("flat mode requires J = 1")
        if self.mode != "validate":
            for d in self.deltas:
                PulseConfig(d, self.beta, self.T).require_well_conditioned()

    def pulse(self, delta: float) -> PulseConfig:
        return PulseConfig(delta=delta, beta=self.beta, T=self.T)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string-or-typed values keyed by field name or CLI flag name."""
        aliases = {"k": "K", "l": "L", "j": "J", "n": "N", "grid": "M", "t_symbol": "T", "t": "T",
                   "delta": "deltas", "r": "realizations"}
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, val in values.items():
            if val is None:
                continue
            name = aliases.get(key.replace("-", "_").lower(), key.replace("-", "_"))
            if name not in types:
                raise ValueError(f"unknown config key {key!r}")
            t = types[name]
            if name in ("snr_db", "deltas"):
                kw[name] = val
            elif t == "int":
                kw[name] = int(val)
            elif t == "float":
                kw[name] = float(val)
            else:
                kw[name] = val
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = list(self.snr_db)
        d["deltas"] = list(self.deltas)
        return d


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


# -- sweeps -------------------------------------------------------------------


def _draw(cfg: ExperimentConfig, index: int):
    if cfg.mode == "flat":
        return gen_flat(cfg.K, cfg.L, cfg.seed, index)
    return gen_fs(cfg.K, cfg.L, cfg.J, cfg.seed, index)


def _realization(cfg: ExperimentConfig, index: int) -> np.ndarray:
    """Per-realization values, shape ``(n_delta, n_snr, 2)``: optimal and white input."""
    ch = _draw(cfg, index)
    out = np.empty((len(cfg.deltas), len(cfg.snr_db), 2))
    for a, d in enumerate(cfg.deltas):
        pc = cfg.pulse(d)
        system = None
        if cfg.mode == "fs" and cfg.engine == "time":
            system = fs_system(ch, pc, cfg.N)
        for b, s in enumerate(cfg.snr_db):
            P = 10.0 ** (s / 10.0)
            if cfg.mode == "flat":
                opt = flat_capacity(ch, P, 1.0, pc).bits_per_channel_use
                eq = equal_power_capacity_spectral(ch, P, 1.0, pc, cfg.M)
            elif cfg.engine == "time":
                opt = fs_capacity_time(ch, P, 1.0, pc, cfg.N, system=system,
                                       method=cfg.fs_method).bits_per_channel_use
                eq = equal_power_capacity(ch, P, 1.0, pc, cfg.N, system=system)
            else:
                opt = fs_capacity_spectral(ch, P, 1.0, pc, cfg.M).bits_per_channel_use
                eq = equal_power_capacity_spectral(ch, P, 1.0, pc, cfg.M)
            out[a, b] = (opt / pc.bandwidth_factor, eq / pc.bandwidth_factor)
    return out


def _guarded(cfg, index):
    try:
        return _realization(cfg, index)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise SweepError(f"{type(exc).__name__}: {exc}", index, cfg.seed) from exc


def _mean_stderr(x, axis=0):
    R = x.shape[axis]
    mean = x.mean(axis=axis)
    if R < 2:
        return mean, np.full(mean.shape, np.nan)
    return mean, x.std(axis=axis, ddof=1) / math.sqrt(R)


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: list
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
        return buf.getvalue()

    def column(self, name: str, delta: float | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows if delta is None or r["delta"] == delta])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run_sweep(cfg: ExperimentConfig, *, write: bool = True) -> SweepResult:
    """Average capacity over ``R`` realizations for every ``(delta, snr)`` pair.

    Rows are ordered by ``delta`` (as given) then SNR. Standard errors use
    the unbiased sample variance and are ``nan`` for ``R = 1``. With
    ``cfg.out`` set and ``write=True`` the CSV and a JSON metadata sidecar
    (``<out>.json``) are written.
    """
    if cfg.mode not in ("flat", "fs"):
        raise ValueError(f"sweeps need mode 'flat' or 'fs', got {cfg.mode!r}")
    idx = range(cfg.realizations)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda i: _guarded(cfg, i), idx))
    else:
        parts = [_guarded(cfg, i) for i in idx]
    samples = np.stack(parts)  # (R, n_delta, n_snr, 2), index order
    mean, se = _mean_stderr(samples)
    rows = []
    for a, d in enumerate(cfg.deltas):
        for b, s in enumerate(cfg.snr_db):
            rows.append({
                "snr_db": s,
                "delta": d,
                "beta": cfg.beta,
                "mean_capacity_bits_s_hz": mean[a, b, 0],
                "stderr": se[a, b, 0],
                "mean_equal_power_bits_s_hz": mean[a, b, 1],
                "stderr_equal_power": se[a, b, 1],
                "R": cfg.realizations,
                "seed": cfg.seed,
            })
    meta = {
        "schema": SCHEMA_VERSION,
        "columns": SWEEP_COLUMNS,
        "config": cfg.to_dict(),
        "snr_definition": "P / noise, noise = 1",
        "units": "bit/s/Hz = bits per channel use / (delta (1 + beta))",
        "realizations": "substream (seed, index); one channel set shared by all SNR points and deltas",
        "equal_power_baseline": "white input Sigma_A = c I, frequency-domain limit"
        if cfg.mode == "flat" or cfg.engine == "spectral" else "white input Sigma_A = c I, N-block",
    }
    result = SweepResult(rows=rows, samples=samples, metadata=meta)
    if write and cfg.out:
        Path(cfg.out).write_text(result.to_csv())
        Path(str(cfg.out) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return result


# -- spectrum dump ------------------------------------------------------------


def run_spectrum(cfg: ExperimentConfig, *, write: bool = True):
    """Spectrum of one realization at the first SNR and ``delta`` of the config.

    The channel comes from ``cfg.channel_file`` if set, else from substream
    ``(seed, 0)``. Returns ``(solution, csv_text)``.
    """
    if cfg.channel_file:
        ch = load_channel(cfg.channel_file)
    elif cfg.mode == "flat" or cfg.J == 1:
        ch = FsChannel(gen_flat(cfg.K, cfg.L, cfg.seed, 0).H[None])
    else:
        ch = gen_fs(cfg.K, cfg.L, cfg.J, cfg.seed, 0)
    pc = cfg.pulse(cfg.deltas[0])
    P = 10.0 ** (cfg.snr_db[0] / 10.0)
    sol = fs_capacity_spectral(ch, P, 1.0, pc, cfg.M)
    text = write_spectrum_csv(sol)
    if write and cfg.out:
        Path(cfg.out).write_text(text)
        meta = {"schema": "ftnmimo-spectrum/1", "config": cfg.to_dict(),
                "bits_per_channel_use": sol.bits_per_channel_use,
                "bits_per_s_per_hz": sol.bits_per_s_per_hz, "water_level_inverse": 1.0 / sol.mu}
        Path(str(cfg.out) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sol, text


# -- self-checks ----------------------------------------------------------------

DEFAULT_TOLERANCES = {
    "oracle_flat": 1e-4,
    "oracle_fs": 1e-4,
    "n_independence": 1e-9,
    "single_tap_reduction": 1e-8,
    "time_frequency": 0.01,
    "szego_convergence": 1.0,
    "mazo_guard": 0.0,
}


def _check(name, measured, threshold, passed, **detail):
    return {"name": name, "passed": bool(passed), "measured": float(measured),
            "threshold": float(threshold), "detail": detail}


def run_validate(cfg: ExperimentConfig | None = None, tolerances: dict | None = None) -> dict:
    """Cross-checks on small instances; returns a JSON-ready report.

    Each check records the measured deviation and its threshold. A check
    that raises is recorded as failed with the error message; nothing is
    raised to the caller. ``cfg.seed`` selects the channels and
    ``cfg.fs_method`` the block solver under test.
    """
    cfg = cfg or ExperimentConfig(mode="validate")
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        unknown = set(tolerances) - set(tol)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}")
        tol.update({k: float(v) for k, v in tolerances.items()})
    seed = cfg.seed
    checks = []

    def guarded(name, fn):
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # noqa: BLE001 - failures are data here
            res = _check(name, float("nan"), tol[name], False, error=f"{type(exc).__name__}: {exc}")
        res["detail"]["seconds"] = round(time.perf_counter() - t0, 3)
        checks.append(res)

    def oracle_flat():
        pc = PulseConfig(0.9, 0.25, cfg.T)
        worst = 0.0
        for i in range(3):
            ch = gen_flat(2, 2, seed, i)
            for s in (0.0, 10.0, 20.0):
                P = 10 ** (s / 10)
                o = brute_force_capacity(ch, P, 1.0, pc, 4).objective
                worst = max(worst, abs(o - flat_capacity(ch, P, 1.0, pc).bits_per_channel_use))
        return _check("oracle_flat", worst, tol["oracle_flat"], worst <= tol["oracle_flat"],
                      channels=3, N=4)

    def oracle_fs():
        pc = PulseConfig(0.9, 0.25, cfg.T)
        worst = 0.0
        for i in range(3):
            ch = gen_fs(2, 2, 2, seed, i)
            o = brute_force_capacity(ch, 10.0, 1.0, pc, 8).objective
            c = fs_capacity_time(ch, 10.0, 1.0, pc, 8, method=cfg.fs_method).bits_per_channel_use
            worst = max(worst, abs(o - c))
        return _check("oracle_fs", worst, tol["oracle_fs"], worst <= tol["oracle_fs"],
                      channels=3, N=8, J=2, fs_method=cfg.fs_method)

    def n_independence():
        pc = PulseConfig(0.8, 0.5, cfg.T)
        worst = 0.0
        for i in range(5):
            ch = gen_flat(2, 2, seed, i)
            C = flat_capacity(ch, 100.0, 1.0, pc).bits_per_channel_use
            for N in (1, 2, 4, 8, 16, 32):
                worst = max(worst, abs(flat_capacity_blockform(ch, 100.0, 1.0, pc, N) - C))
        return _check("n_independence", worst, tol["n_independence"],
                      worst <= tol["n_independence"], channels=5)

    def single_tap():
        pc = PulseConfig(0.8, 0.5, cfg.T)
        worst = 0.0
        for i in range(5):
            ch = gen_flat(2, 2, seed, i)
            C = flat_capacity(ch, 100.0, 1.0, pc).bits_per_channel_use
            for N in (4, 16, 32):
                c = fs_capacity_time(FsChannel(ch.H[None]), 100.0, 1.0, pc, N,
                                     method=cfg.fs_method).bits_per_channel_use
                worst = max(worst, abs(c - C))
        return _check("single_tap_reduction", worst, tol["single_tap_reduction"],
                      worst <= tol["single_tap_reduction"], channels=5)

    def time_frequency():
        pc = PulseConfig(0.8, 0.5, cfg.T)
        worst = 0.0
        for i in range(2):
            ch = gen_fs(2, 2, 5, seed, i)
            t = fs_capacity_time(ch, 10.0, 1.0, pc, 256, method=cfg.fs_method).bits_per_channel_use
            f = fs_capacity_spectral(ch, 10.0, 1.0, pc, 1024).bits_per_channel_use
            worst = max(worst, abs(t - f) / f)
        return _check("time_frequency", worst, tol["time_frequency"],
                      worst <= tol["time_frequency"], channels=2, N=256, M=1024, J=5,
                      fs_method=cfg.fs_method)

    def szego():
        pc = PulseConfig(0.9, 0.25, cfg.T)
        rows = szego_convergence(gen_fs(1, 1, 5, seed, 0), pc, [32, 64, 128, 256], M=4096)
        errs = np.array([r.error for r in rows])
        # largest ratio of successive errors; < 1 means strictly decreasing
        worst = float(np.max(errs[1:] / errs[:-1]))
        return _check("szego_convergence", worst, tol["szego_convergence"],
                      worst < tol["szego_convergence"], errors=errs.tolist(), N=[r.N for r in rows])

    def mazo():
        try:
            pc = PulseConfig(0.7, 0.3, cfg.T)
            fs_capacity_time(gen_fs(1, 1, 2, seed, 0), 10.0, 1.0, pc, 256)
        except (MazoRegion, IllConditioned) as exc:
            return _check("mazo_guard", 0.0, tol["mazo_guard"], True,
                          expected_failure=type(exc).__name__)
        return _check("mazo_guard", 1.0, tol["mazo_guard"], False,
                      expected_failure="none raised")

    guarded("oracle_flat", oracle_flat)
    guarded("oracle_fs", oracle_fs)
    guarded("n_independence", n_independence)
    guarded("single_tap_reduction", single_tap)
    guarded("time_frequency", time_frequency)
    guarded("szego_convergence", szego)
    guarded("mazo_guard", mazo)
    report = {
        "schema": VALIDATE_SCHEMA,
        "passed": all(c["passed"] for c in checks),
        "seed": seed,
        "fs_method": cfg.fs_method,
        "tolerances": tol,
        "checks": checks,
    }
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
