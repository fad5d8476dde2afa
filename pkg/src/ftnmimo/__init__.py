"""Capacity of MIMO faster-than-Nyquist signaling with raised-cosine pulses."""
from .capacity_freq import (
    SpectralSolution,
    equal_power_capacity_spectral,
    fs_capacity_spectral,
    generating_objective,
    input_eigenspectrum,
    input_generating_matrix,
    power_generating_matrix,
    write_spectrum_csv,
)
from .capacity_time import (
    CapacityReport,
    FsSystem,
    equal_power_capacity,
    flat_capacity,
    flat_capacity_blockform,
    fs_capacity_time,
    fs_system,
    mutual_info_given_cov,
    optimal_fs_covariance,
)
from .channel import FlatChannel, FsChannel, gen_flat, gen_fs, load_channel, save_channel, spectrum_matrix
from .exceptions import *  # noqa: F401,F403
from .gram import build_gram, build_shifted_gram
from .oracle import brute_force_capacity, szego_convergence
from .pulse import PulseConfig, folded_spectrum, g_samples
from .waterfill import classic_waterfill, spectral_waterfill, weighted_waterfill

__version__ = "0.1.0"
