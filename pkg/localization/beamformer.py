"""
GCC time-delay functions and steered response power (SRP) maps.

Lag convention: gcc(x1, x2) at lag L is sum_n x1[n] * x2[n + L], so a copy
of x1 delayed by d samples in x2 peaks at L = +d. A pair (a, b) is steered
by reading gcc(x_b, x_a) at round(expected_tdoa(a, b) * fs).
"""
import logging
from typing import Optional

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import get_window

from scene_sim.geometry import SPEED_OF_SOUND, mic_distances, pair_indices
from scene_sim.models import MicArray, MultichannelSignal

from .models import (
    GccFunction, MapMode, MapPeak, SteeredPowerMap, SteeringGrid, Weighting, ShapeError,
)

logger = logging.getLogger(__name__)

PHAT_EPSILON = 1e-12
MIN_GCC_LENGTH = 16
MIN_BANDWIDTH_FRAME = 64
# Central band holding 95% of the spectral energy.
BANDWIDTH_LOW_QUANTILE = 0.025
BANDWIDTH_HIGH_QUANTILE = 0.975
DEFAULT_BANDWIDTH_THRESHOLD = 4000.0


def phat_weight(cross_spectrum_bin: complex) -> float:
    """1 / max(|X1 X2*|, eps) for a single cross-spectrum bin."""
    return 1.0 / max(abs(cross_spectrum_bin), PHAT_EPSILON)


def phat_weights(cross_spectrum: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(np.abs(cross_spectrum), PHAT_EPSILON)


def gcc_fft_length(n_samples: int) -> int:
    """Smallest power of two holding a full linear correlation of n samples."""
    return 1 << int(np.ceil(np.log2(max(2 * n_samples, 2))))


def _weighted(cross: np.ndarray, weighting: Weighting) -> np.ndarray:
    if Weighting(weighting) is Weighting.PHAT:
        return cross * phat_weights(cross)
    return cross


def gcc(x1, x2, weighting: Weighting = Weighting.PHAT, n_fft: Optional[int] = None,
        max_lag: Optional[int] = None) -> GccFunction:
    """Generalized cross-correlation of two equal-length channels."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.ndim != 1 or x2.ndim != 1 or x1.size != x2.size:
        raise ShapeError(f"GCC needs two equal-length channels, got {x1.shape} and {x2.shape}")
    n = x1.size
    if n < MIN_GCC_LENGTH:
        raise ShapeError(f"GCC needs at least {MIN_GCC_LENGTH} samples, got {n}")
    n_fft = n_fft or gcc_fft_length(n)
    if n_fft < 2 * n - 1 or n_fft & (n_fft - 1):
        raise ShapeError(f"FFT length {n_fft} must be a power of two >= {2 * n - 1}")

    cross = np.conj(sp_fft.rfft(x1, n_fft)) * sp_fft.rfft(x2, n_fft)
    r = sp_fft.irfft(_weighted(cross, weighting), n_fft)

    reach = n - 1 if max_lag is None else min(int(max_lag), n - 1)
    lags = np.arange(-reach, reach + 1)
    return GccFunction(lags=lags, values=r[lags % n_fft])


def estimate_bandwidth(frame: MultichannelSignal) -> float:
    """
    Width (Hz) of the band holding the central 95% of the channel-averaged,
    Hann-windowed power spectrum. An all-zero frame has bandwidth 0.
    """
    n = frame.length
    if n < MIN_BANDWIDTH_FRAME:
        raise ShapeError(f"Bandwidth estimation needs at least {MIN_BANDWIDTH_FRAME} samples, got {n}")
    window = get_window('hann', n)
    spectrum = np.mean(np.abs(sp_fft.rfft(frame.channels * window, axis=1)) ** 2, axis=0)
    total = spectrum.sum()
    if total <= 0:
        return 0.0
    cumulative = np.cumsum(spectrum) / total
    freqs = sp_fft.rfftfreq(n, 1.0 / frame.sample_rate)
    lo = freqs[min(np.searchsorted(cumulative, BANDWIDTH_LOW_QUANTILE), freqs.size - 1)]
    hi = freqs[min(np.searchsorted(cumulative, BANDWIDTH_HIGH_QUANTILE), freqs.size - 1)]
    return float(hi - lo)


def srp_map(signal: MultichannelSignal, array: MicArray, grid: SteeringGrid,
            weighting: Weighting = Weighting.PHAT,
            speed_of_sound: float = SPEED_OF_SOUND) -> SteeredPowerMap:
    """
    Steered response power over every grid cell. Each cell sums the pair
    GCC values at the cell's rounded TDOA lags; the channels' zero-lag
    autocorrelations form the baseline so that power = sum_a R_aa(0)
    + 2 * sum_{a<b} R_ab(tau_ab), clamped at 0. The baseline is the same
    for every cell, so the argmax matches that of the plain pair sum.
    """
    channels = signal.channels
    if channels.shape[0] != array.size:
        raise ShapeError(f"Signal has {channels.shape[0]} channels but the array has {array.size} microphones")
    if array.size < 2:
        raise ShapeError('SRP needs at least two microphones')
    n = channels.shape[1]
    if n < MIN_GCC_LENGTH:
        raise ShapeError(f"SRP needs at least {MIN_GCC_LENGTH} samples, got {n}")
    weighting = Weighting(weighting)
    n_fft = gcc_fft_length(n)

    spectra = sp_fft.rfft(channels, n_fft, axis=1)
    first, second = pair_indices(array)
    # gcc(x_b, x_a) for every pair, computed once and shared by all cells.
    cross = np.conj(spectra[second]) * spectra[first]
    pair_gcc = sp_fft.irfft(_weighted(cross, weighting), n_fft, axis=1)
    auto = sp_fft.irfft(_weighted(np.abs(spectra) ** 2 + 0j, weighting), n_fft, axis=1)[:, 0]

    centers = grid.cell_centers().reshape(-1, 3)
    distances = mic_distances(array, centers)
    tdoa = (distances[:, first] - distances[:, second]) / speed_of_sound
    lags = np.clip(np.rint(tdoa * signal.sample_rate).astype(np.int64), -(n - 1), n - 1)
    pair_values = pair_gcc[np.arange(first.size)[None, :], lags % n_fft]

    power = auto.sum() + 2.0 * pair_values.sum(axis=1)
    power = np.maximum(power, 0.0).reshape(grid.shape)
    mode = MapMode.for_weighting(weighting)
    logger.debug(f"{mode.value} map over {grid.n_u}x{grid.n_v} cells, {first.size} pairs")
    return SteeredPowerMap(grid=grid, power=power, mode_used=mode)


def select_weighting(signal: MultichannelSignal,
                     bandwidth_threshold: float = DEFAULT_BANDWIDTH_THRESHOLD) -> Weighting:
    """Narrowband frames use plain SRP, wideband frames (including the threshold) use PHAT."""
    bandwidth = estimate_bandwidth(signal)
    weighting = Weighting.CONST if bandwidth < bandwidth_threshold else Weighting.PHAT
    logger.debug(f"Estimated bandwidth {bandwidth:.0f} Hz -> {weighting.value}")
    return weighting


def combined_srp_map(signal: MultichannelSignal, array: MicArray, grid: SteeringGrid,
                     bandwidth_threshold: float = DEFAULT_BANDWIDTH_THRESHOLD,
                     speed_of_sound: float = SPEED_OF_SOUND) -> SteeredPowerMap:
    weighting = select_weighting(signal, bandwidth_threshold)
    return srp_map(signal, array, grid, weighting, speed_of_sound)


def find_peak(power_map: SteeredPowerMap, floor: float = 0.0) -> Optional[MapPeak]:
    """
    Argmax cell of the map, or None when it is below ``floor``. Ties go to
    the lowest (i, j) in lexicographic order.
    """
    flat = int(np.argmax(power_map.power))
    i, j = np.unravel_index(flat, power_map.power.shape)
    power = float(power_map.power[i, j])
    if power < floor:
        return None
    return MapPeak(cell=(int(i), int(j)), power=power)
