"""
Free-field synthesis of multichannel microphone signals.

Each source reaches each microphone as a delayed copy of its waveform,
attenuated by 1/r. Fractional delays use an 8-tap Hann-windowed sinc.
"""
import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile

from .geometry import mic_distances
from .models import (
    MicArray, MultichannelSignal, SceneDescription, SourceSpec, InvalidSceneError,
)

logger = logging.getLogger(__name__)

# Interpolation taps m = -3..4 around floor(position).
SINC_TAPS = np.arange(-3, 5)
SINC_HALF_WIDTH = 4.0

# Path lengths are quantized to a picometer so that equidistant
# microphones receive bit-identical signals.
DISTANCE_DECIMALS = 12


def frame_seed(seed: int, frame_index: int) -> int:
    """Derive an independent seed for one frame of a multi-frame run."""
    return int(np.random.SeedSequence([int(seed), int(frame_index)]).generate_state(1)[0])


def _sinc_kernel(fraction: np.ndarray) -> np.ndarray:
    """Tap weights, shape (..., 8), for sampling at base + fraction."""
    t = fraction[..., None] - SINC_TAPS
    window = 0.5 * (1.0 + np.cos(np.pi * t / SINC_HALF_WIDTH))
    return np.sinc(t) * window


def fractional_delay(signal: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """
    Band-limited interpolation of ``signal`` at the (non-integer) sample
    positions given; every position needs 3 samples before and 4 after.
    """
    base = np.floor(positions).astype(np.int64)
    kernel = _sinc_kernel(positions - base)
    index = base[..., None] + SINC_TAPS
    return np.sum(signal[index] * kernel, axis=-1)


def _read_sample(path: str, length: int) -> np.ndarray:
    sample_path = Path(path)
    if not sample_path.exists():
        raise FileNotFoundError(f"Sample file not found: {sample_path}")
    _, data = wavfile.read(str(sample_path))
    data = np.asarray(data, dtype=float)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.size == 0:
        raise InvalidSceneError(f"Sample file {sample_path} is empty")
    return np.resize(data, length)


def source_waveform(source: SourceSpec, length: int, sample_rate: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Unit-power waveform of ``length`` samples for one source."""
    kind = source.signal_kind
    if kind == 'sine':
        if not source.frequency or source.frequency <= 0:
            raise InvalidSceneError('Sine sources need a positive frequency')
        phase = rng.uniform(0.0, 2.0 * np.pi)
        t = np.arange(length) / sample_rate
        wave = np.sqrt(2.0) * np.sin(2.0 * np.pi * source.frequency * t + phase)
    elif kind == 'white_noise':
        wave = rng.standard_normal(length)
    elif kind == 'sample':
        if not source.sample_path:
            raise InvalidSceneError('Sample sources need a sample file')
        wave = _read_sample(source.sample_path, length)
    else:
        raise InvalidSceneError(f"Unknown signal kind '{kind}'")

    power = np.mean(wave ** 2)
    if power > 0:
        wave = wave / np.sqrt(power)
    return wave


def _clean_signal(scene: SceneDescription, array: MicArray, sample_rate: float,
                  n_samples: int, source_rngs) -> np.ndarray:
    c = scene.speed_of_sound
    clean = np.zeros((array.size, n_samples))
    for source, rng in zip(scene.sources, source_rngs):
        position = np.asarray(source.position, dtype=float)
        if position.shape != (3,) or not np.all(np.isfinite(position)):
            raise InvalidSceneError(f"Source position must be a finite 3-vector, got {source.position}")
        if position[2] <= 0:
            raise InvalidSceneError(f"Source at {tuple(position)} is behind the array plane (z <= 0)")

        distances = np.round(mic_distances(array, position)[0], DISTANCE_DECIMALS)
        taps = [(0.0, 1.0)] + [(echo.delay_s, echo.gain) for echo in source.echoes]
        max_delay = (distances.max() / c + max(delay for delay, _ in taps)) * sample_rate
        padding = int(math.ceil(max_delay)) + 8
        wave = source_waveform(source, n_samples + padding + 8, sample_rate, rng)

        n = np.arange(n_samples)
        for extra_delay, gain in taps:
            delays = (distances / c + extra_delay) * sample_rate
            positions = n[None, :] + padding - delays[:, None]
            amplitude = gain * source.level / distances
            clean += amplitude[:, None] * fractional_delay(wave, positions)
    return clean


def synthesize_scene(scene: SceneDescription, array: MicArray, sample_rate: float = 32000,
                     duration: float = 0.128) -> MultichannelSignal:
    """
    Render every source onto every microphone and add independent white noise
    at scene.snr_db relative to the mean per-channel source power.
    """
    if not duration > 0:
        raise InvalidSceneError(f"Duration must be positive, got {duration}")
    if not sample_rate > 0:
        raise InvalidSceneError(f"Sample rate must be positive, got {sample_rate}")

    n_samples = max(1, int(round(duration * sample_rate)))
    streams = np.random.SeedSequence(int(scene.seed)).spawn(len(scene.sources) + 1)
    source_rngs = [np.random.default_rng(s) for s in streams[:-1]]
    noise_rng = np.random.default_rng(streams[-1])

    clean = _clean_signal(scene, array, sample_rate, n_samples, source_rngs)
    noise_power = resolve_noise_power(scene, clean)
    if noise_power > 0:
        clean = clean + np.sqrt(noise_power) * noise_rng.standard_normal(clean.shape)

    logger.debug(
        f"Synthesized {len(scene.sources)} source(s) on {array.size} channels, "
        f"{n_samples} samples, noise power {noise_power:.3g}"
    )
    return MultichannelSignal(sample_rate=sample_rate, channels=clean)


def resolve_noise_power(scene: SceneDescription, clean: np.ndarray) -> float:
    """Absolute noise power for a scene given its noise-free channels."""
    if scene.noise_power is not None:
        return float(scene.noise_power)
    if not scene.sources:
        return 1.0
    if scene.snr_db is None or math.isinf(scene.snr_db):
        return 0.0
    signal_power = float(np.mean(clean ** 2))
    return signal_power / (10.0 ** (scene.snr_db / 10.0))


def scene_noise_power(scene: SceneDescription, array: MicArray, sample_rate: float = 32000,
                      duration: float = 0.128) -> float:
    """Noise power synthesize_scene would add for this scene."""
    n_samples = max(1, int(round(duration * sample_rate)))
    streams = np.random.SeedSequence(int(scene.seed)).spawn(len(scene.sources) + 1)
    clean = _clean_signal(scene, array, sample_rate, n_samples,
                          [np.random.default_rng(s) for s in streams[:-1]])
    return resolve_noise_power(scene, clean)


def silence_like(scene: SceneDescription, noise_power: float, seed: Optional[int] = None) -> SceneDescription:
    """Source-free copy of a scene with the given absolute noise power."""
    return replace(scene, sources=(), noise_power=noise_power,
                   seed=scene.seed if seed is None else seed)
