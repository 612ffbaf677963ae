"""STFT analysis/synthesis with perfect reconstruction on the overlapped interior.

Framing is left-aligned with no centering: frame t covers samples
[t*hop, t*hop + win_length). One frame step therefore equals exactly one
hop of time-domain delay, which keeps subband filter taps interpretable
as integer-hop delays. Samples past the last full frame are not analyzed.

Waveforms are normalized by their maximum absolute value before analysis;
the factor is kept on the spectrogram so synthesis can undo it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window


@dataclass
class Waveform:
    """Mono time-domain signal with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional (mono)")
        if self.samples.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class StftConfig:
    """Analysis/synthesis parameters. Both windows are periodic Hann."""

    win_length: int = 512
    hop: int = 128
    fft_size: int | None = None

    def __post_init__(self):
        if self.fft_size is None:
            self.fft_size = self.win_length
        if self.win_length < 2 or self.hop < 1:
            raise ValueError("window and hop must be positive")
        if self.win_length % self.hop != 0:
            raise ValueError("hop must divide win_length")
        if self.fft_size != self.win_length:
            raise ValueError("fft_size must equal win_length")

    @property
    def window(self) -> np.ndarray:
        return get_window("hann", self.win_length, fftbins=True)

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass
class Spectrogram:
    """Complex half-spectrum matrix, frequency bins (rows) x frames (cols).

    ``scale`` is the max-abs normalization factor divided out of the source
    waveform before analysis; ``inverse`` multiplies it back in.
    """

    data: np.ndarray
    config: StftConfig
    scale: float = 1.0
    sample_rate: int = 16000

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise ValueError("spectrogram data must be 2-D")
        if self.data.shape[0] != self.config.num_bins:
            raise ValueError(
                f"expected {self.config.num_bins} frequency bins, "
                f"got {self.data.shape[0]}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite values")

    @property
    def num_bins(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]


def num_frames(num_samples: int, cfg: StftConfig) -> int:
    """Frame count for left-aligned analysis: 1 + floor((N - win) / hop)."""
    if num_samples < cfg.win_length:
        raise ValueError(
            f"input too short: {num_samples} samples < one window "
            f"({cfg.win_length})"
        )
    return 1 + (num_samples - cfg.win_length) // cfg.hop


def forward(wave: Waveform, cfg: StftConfig | None = None,
            normalize: bool = True) -> Spectrogram:
    """Analyze a waveform into a complex spectrogram.

    Parameters
    ----------
    wave : Waveform
        Input signal; must be at least one window long.
    cfg : StftConfig, optional
        Transform configuration (512/128 Hann by default).
    normalize : bool
        Divide by the max absolute sample before analysis and store the
        factor in ``Spectrogram.scale``. A silent input keeps scale 1.

    Returns
    -------
    Spectrogram with shape (fft_size // 2 + 1, num_frames).
    """
    if cfg is None:
        cfg = StftConfig()
    x = wave.samples
    T = num_frames(x.size, cfg)
    scale = 1.0
    if normalize:
        peak = float(np.max(np.abs(x)))
        if peak > 0.0:
            scale = peak
            x = x / scale
    frames = sliding_window_view(x, cfg.win_length)[:: cfg.hop][:T]
    spec = np.fft.rfft(frames * cfg.window, n=cfg.fft_size, axis=1)
    return Spectrogram(spec.T, cfg, scale=scale, sample_rate=wave.sample_rate)


def synthesis_norm(num_frames: int, cfg: StftConfig) -> np.ndarray:
    """Overlap-added squared synthesis window, computed numerically."""
    out_len = (num_frames - 1) * cfg.hop + cfg.win_length
    w2 = cfg.window ** 2
    wsum = np.zeros(out_len)
    for t in range(num_frames):
        wsum[t * cfg.hop: t * cfg.hop + cfg.win_length] += w2
    return wsum


def inverse(spec: Spectrogram) -> Waveform:
    """Weighted overlap-add synthesis, undoing the stored normalization.

    Output length is (T - 1) * hop + win_length. Samples where the
    overlap-added window power vanishes (the very signal edges) are zero.
    """
    cfg = spec.config
    T = spec.num_frames
    frames = np.fft.irfft(spec.data.T, n=cfg.fft_size, axis=1)
    frames *= cfg.window
    out_len = (T - 1) * cfg.hop + cfg.win_length
    acc = np.zeros(out_len)
    for t in range(T):
        acc[t * cfg.hop: t * cfg.hop + cfg.win_length] += frames[t]
    wsum = synthesis_norm(T, cfg)
    out = np.divide(acc, wsum, out=np.zeros_like(acc), where=wsum > 1e-12)
    return Waveform(out * spec.scale, spec.sample_rate)
