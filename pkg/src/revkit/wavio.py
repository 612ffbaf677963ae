"""WAV input/output: mono 16 kHz, 16-bit PCM or 32-bit float, no resampling."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .stft import Waveform


def read_wav(path, expected_rate: int | None = 16000) -> Waveform:
    """Load a mono WAV file.

    16-bit PCM data is scaled to [-1, 1); 32-bit float is used as-is.
    Other encodings, multichannel files, and (when ``expected_rate`` is
    set) other sample rates are rejected; there is no resampling.
    """
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: only mono WAV files are supported")
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz "
            "(resampling is not supported)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(
            f"{path}: unsupported sample format {data.dtype}; "
            "use 16-bit PCM or 32-bit float"
        )
    return Waveform(samples, rate)


def write_wav(path, wave: Waveform, pcm16: bool = False) -> None:
    """Write a waveform as 32-bit float WAV (default) or 16-bit PCM."""
    if pcm16:
        clipped = np.clip(wave.samples, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, wave.sample_rate,
                      np.round(clipped * 32768.0).astype(np.int16))
    else:
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float32))
