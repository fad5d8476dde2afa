import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftnmimo import (
    DimensionCap,
    DimensionMismatch,
    FlatChannel,
    FsChannel,
    MazoRegion,
    NoPositiveGain,
    NotPSD,
    PulseConfig,
    equal_power_capacity,
    flat_capacity,
    flat_capacity_blockform,
    fs_capacity_time,
    fs_system,
    gen_flat,
    gen_fs,
    mutual_info_given_cov,
    optimal_fs_covariance,
)

from ftnmimo.gram import build_gram, inverse
from reference import svd_mimo_capacity

H0 = np.array([[1, 0.5j], [0.2, 1 - 1j]])


def test_flat_frozen_value():
    # computed with the SVD / bisection reference at budget P dT = 9
    rep = flat_capacity(FlatChannel(H0), 1000.0, 1.0, PulseConfig(0.9, 0.25))
    assert rep.bits_per_channel_use == pytest.approx(5.925570952846788, rel=1e-12)
    assert np.allclose(rep.eigenvalues, [2.34929042, 0.94070958], atol=1e-8)
    assert rep.bits_per_s_per_hz == pytest.approx(5.925570952846788 / (0.9 * 1.25), rel=1e-12)


def test_flat_two_stream_example():
    # tau = (4, 1) with budget 1: water level 1.125
    rep = flat_capacity(FlatChannel(np.diag([2.0, 1.0])), 100.0, 1.0, PulseConfig(1.0, 0.0))
    assert rep.bits_per_channel_use == pytest.approx(math.log2(4.5) + math.log2(1.125), abs=1e-12)
    assert np.allclose(rep.allocations, [0.875, 0.125])


def test_siso_nyquist():
    rep = flat_capacity(FlatChannel([[1.0]]), 100.0, 1.0, PulseConfig(1.0, 0.0))
    assert rep.bits_per_channel_use == pytest.approx(1.0, abs=1e-12)
    assert rep.bits_per_s_per_hz == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_flat_reduces_to_classical_mimo(seed):
    ch = gen_flat(3, 2, seed)
    rep = flat_capacity(ch, 300.0, 1.0, PulseConfig(1.0, 0.0))
    assert rep.bits_per_channel_use == pytest.approx(svd_mimo_capacity(ch.H, 3.0), abs=1e-9)


@given(st.integers(0, 10_000), st.floats(0.5, 1.0), st.floats(0.0, 1.0), st.floats(-10, 30))
def test_flat_power_and_feasibility(seed, delta, u, snr_db):
    b0 = 1.0 / delta - 1.0
    cfg = PulseConfig(delta, min(1.0, b0 + u * (1.0 - b0) + 1e-12))
    P = 10 ** (snr_db / 10)
    rep = flat_capacity(gen_flat(2, 3, seed), P, 1.0, cfg)
    assert rep.power_used == pytest.approx(P, rel=1e-9)
    assert np.all(rep.allocations >= 0)
    left = rep.covariance.kron_left
    assert np.allclose(left, left.conj().T)
    assert np.linalg.eigvalsh(left).min() > -1e-12 * max(1.0, np.abs(left).max())


def test_ftn_gain_over_nyquist():
    ch = gen_flat(2, 2, 3)
    base = flat_capacity(ch, 100.0, 1.0, PulseConfig(1.0, 0.5)).bits_per_s_per_hz
    ftn = flat_capacity(ch, 100.0, 1.0, PulseConfig(1 / 1.5, 0.5)).bits_per_s_per_hz
    assert ftn >= base


def test_capacity_increases_with_power():
    ch = gen_flat(2, 2, 9)
    cfg = PulseConfig(0.8, 0.5)
    vals = [flat_capacity(ch, 10 ** (s / 10), 1.0, cfg).bits_per_channel_use for s in range(0, 31, 5)]
    assert np.all(np.diff(vals) > 0)


def test_zero_channel_flat():
    with pytest.raises(NoPositiveGain):
        flat_capacity(FlatChannel(np.zeros((2, 2))), 100.0, 1.0, PulseConfig())


def test_mazo_region_rejected():
    with pytest.raises(MazoRegion):
        flat_capacity(FlatChannel(H0), 100.0, 1.0, PulseConfig(0.7, 0.3))
    with pytest.raises(MazoRegion):
        fs_capacity_time(gen_fs(1, 1, 2, 0), 100.0, 1.0, PulseConfig(0.7, 0.3), 16)


@pytest.mark.parametrize("N", [1, 4, 16, 32])
@pytest.mark.parametrize("via", [False, True])
def test_blockform_independent_of_n(N, via):
    cfg = PulseConfig(0.9, 0.25)
    ch = FlatChannel(H0)
    ref = flat_capacity(ch, 1000.0, 1.0, cfg).bits_per_channel_use
    assert flat_capacity_blockform(ch, 1000.0, 1.0, cfg, N, via_covariance=via) == pytest.approx(ref, abs=1e-9)


def test_blockform_cap():
    with pytest.raises(DimensionCap):
        flat_capacity_blockform(FlatChannel(H0), 100.0, 1.0, PulseConfig(0.9, 0.25), 65)


def test_optimal_covariance_meets_power():
    cfg = PulseConfig(0.9, 0.25)
    rep = flat_capacity(FlatChannel(H0), 1000.0, 1.0, cfg)
    N = 16
    S = rep.covariance.assemble(N)
    mi = mutual_info_given_cov(S, FlatChannel(H0), cfg, N, 1.0)
    assert mi.power == pytest.approx(1000.0, rel=1e-9)
    assert mi.bits == pytest.approx(rep.bits_per_channel_use, abs=1e-9)


@pytest.mark.parametrize("method", ["weighted", "exact"])
@pytest.mark.parametrize("seed", range(3))
def test_single_tap_reduces_to_flat(method, seed):
    cfg = PulseConfig(0.8, 0.5)
    ch = gen_flat(2, 2, seed)
    fs = FsChannel(ch.H[None])
    ref = flat_capacity(ch, 100.0, 1.0, cfg).bits_per_channel_use
    got = fs_capacity_time(fs, 100.0, 1.0, cfg, 24, method=method).bits_per_channel_use
    assert got == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("method", ["weighted", "exact"])
def test_siso_single_nonzero_tap(method):
    taps = np.zeros((3, 1, 1), complex)
    taps[0, 0, 0] = 1.0
    cfg = PulseConfig(0.8, 0.5)
    rep = fs_capacity_time(FsChannel(taps), 100.0, 1.0, cfg, 512, method=method)
    assert abs(rep.bits_per_channel_use - math.log2(1 + 100 * cfg.spacing)) < 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_exact_dominates_weighted_and_equal_power(seed):
    cfg = PulseConfig(0.8, 0.5)
    ch = gen_fs(2, 2, 3, seed)
    sys_ = fs_system(ch, cfg, 16)
    w = fs_capacity_time(ch, 100.0, 1.0, cfg, 16, system=sys_).bits_per_channel_use
    e = fs_capacity_time(ch, 100.0, 1.0, cfg, 16, system=sys_, method="exact").bits_per_channel_use
    ep = equal_power_capacity(ch, 100.0, 1.0, cfg, 16, system=sys_)
    assert e >= w - 1e-10
    assert e >= ep - 1e-10
    assert w >= ep - 1e-10


@pytest.mark.parametrize("method", ["weighted", "exact"])
def test_fs_covariance_roundtrip(method):
    cfg = PulseConfig(0.85, 0.3)
    ch = gen_fs(2, 2, 2, 5)
    N = 12
    sys_ = fs_system(ch, cfg, N)
    rep = fs_capacity_time(ch, 200.0, 1.0, cfg, N, system=sys_, method=method)
    S = optimal_fs_covariance(rep, sys_)
    assert np.allclose(S, S.conj().T)
    assert np.linalg.eigvalsh(S).min() > -1e-10 * np.abs(S).max()
    mi = mutual_info_given_cov(S, ch, cfg, N, 1.0, system=sys_)
    assert mi.bits == pytest.approx(rep.bits_per_channel_use, abs=1e-9)
    assert mi.power == pytest.approx(200.0, rel=1e-9)
    assert rep.power_used == pytest.approx(200.0, rel=1e-9)


def test_fs_report_fields():
    cfg = PulseConfig(0.9, 0.25)
    rep = fs_capacity_time(gen_fs(2, 2, 2, 1), 10.0, 1.0, cfg, 16)
    assert rep.bits_per_s_per_hz == pytest.approx(rep.bits_per_channel_use / (0.9 * 1.25))
    assert rep.metadata["method"] == "weighted"
    assert rep.weights is not None and np.all(rep.weights > 0)
    with pytest.raises(ValueError):
        fs_capacity_time(gen_fs(2, 2, 2, 1), 10.0, 1.0, cfg, 16, method="bogus")


def test_fs_deterministic():
    cfg = PulseConfig(0.8, 0.5)
    ch = gen_fs(2, 2, 3, 7)
    a = fs_capacity_time(ch, 100.0, 1.0, cfg, 32)
    b = fs_capacity_time(ch, 100.0, 1.0, cfg, 32)
    assert a.bits_per_channel_use == b.bits_per_channel_use
    assert np.array_equal(a.allocations, b.allocations)


def test_degenerate_flag_on_identity_channel():
    cfg = PulseConfig(0.8, 0.5)
    rep = fs_capacity_time(FsChannel(np.eye(2)[None]), 100.0, 1.0, cfg, 16)
    assert rep.metadata["degenerate"]


def test_fs_dimension_checks():
    cfg = PulseConfig(0.9, 0.25)
    with pytest.raises(DimensionCap):
        fs_capacity_time(gen_fs(2, 2, 2, 0), 1.0, 1.0, cfg, 64, max_dim=100)
    with pytest.raises(ValueError):
        fs_capacity_time(gen_fs(1, 1, 5, 0), 1.0, 1.0, cfg, 3)
    with pytest.raises(ValueError):
        fs_capacity_time(gen_fs(1, 1, 2, 0), -1.0, 1.0, cfg, 8)


def test_mutual_info_edge_cases():
    cfg = PulseConfig(0.9, 0.25)
    ch = gen_fs(2, 2, 2, 4)
    N = 8
    zero = mutual_info_given_cov(np.zeros((16, 16)), ch, cfg, N, 1.0)
    assert zero.bits == 0.0 and zero.power == 0.0
    c = 100.0 * cfg.spacing / 2
    white = mutual_info_given_cov(c * np.eye(16), ch, cfg, N, 1.0)
    assert white.bits == pytest.approx(equal_power_capacity(ch, 100.0, 1.0, cfg, N), abs=1e-10)
    assert white.power == pytest.approx(100.0, rel=1e-12)
    bad = np.eye(16)
    bad[0, 0] = -1.0
    with pytest.raises(NotPSD):
        mutual_info_given_cov(bad, ch, cfg, N, 1.0)
    with pytest.raises(DimensionMismatch):
        mutual_info_given_cov(np.eye(15), ch, cfg, N, 1.0)


def test_inverse_gram_feeds_flat_covariance():
    cfg = PulseConfig(0.9, 0.25)
    G = build_gram(cfg, 8)
    assert np.allclose(inverse(G) @ G.entries, np.eye(8), atol=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 1000), st.floats(0.0, 30.0))
def test_fs_exact_feasible_and_above_white_input(seed, snr_db):
    cfg = PulseConfig(0.9, 0.25)
    ch = gen_fs(1, 2, 2, seed)
    P = 10 ** (snr_db / 10)
    sys_ = fs_system(ch, cfg, 8)
    rep = fs_capacity_time(ch, P, 1.0, cfg, 8, system=sys_, method="exact")
    assert rep.power_used == pytest.approx(P, rel=1e-9)
    assert rep.bits_per_channel_use >= equal_power_capacity(ch, P, 1.0, cfg, 8, system=sys_) - 1e-10
