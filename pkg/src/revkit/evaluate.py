"""Batch scoring: RT60/DRR error statistics and log-spectral distortion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stft import Spectrogram

LSD_EPS = 1e-8


@dataclass
class ScoreReport:
    """Per-item errors and MAE/RMSE aggregates for RT60 (s) and DRR (dB)."""

    rt60_errors: np.ndarray
    drr_errors: np.ndarray
    rt60_mae: float = field(init=False)
    rt60_rmse: float = field(init=False)
    drr_mae: float = field(init=False)
    drr_rmse: float = field(init=False)

    def __post_init__(self):
        self.rt60_errors = np.asarray(self.rt60_errors, dtype=np.float64)
        self.drr_errors = np.asarray(self.drr_errors, dtype=np.float64)
        self.rt60_mae, self.rt60_rmse = _mae_rmse(self.rt60_errors)
        self.drr_mae, self.drr_rmse = _mae_rmse(self.drr_errors)


def _mae_rmse(errors: np.ndarray) -> tuple[float, float]:
    return (float(np.mean(np.abs(errors))),
            float(np.sqrt(np.mean(errors ** 2))))


def score_rir_batch(estimates, truths) -> ScoreReport:
    """Score paired (rt60, drr) estimates against reference values.

    Both arguments are sequences of objects with ``rt60`` and ``drr``
    attributes (e.g. AcousticParams) or (rt60, drr) pairs. Reference
    values should come from the same estimators applied to the true
    impulse responses. Missing values (None/NaN) are scoring failures.
    """
    est = [_as_pair(e) for e in estimates]
    ref = [_as_pair(t) for t in truths]
    if len(est) == 0:
        raise ValueError("empty batch")
    if len(est) != len(ref):
        raise ValueError(f"batch sizes differ: {len(est)} vs {len(ref)}")
    bad = [i for i, (e, t) in enumerate(zip(est, ref))
           if not all(np.isfinite([e[0], e[1], t[0], t[1]]))]
    if bad:
        raise ValueError(f"unscorable pairs at indices {bad}")
    e = np.array(est)
    t = np.array(ref)
    return ScoreReport(rt60_errors=e[:, 0] - t[:, 0],
                       drr_errors=e[:, 1] - t[:, 1])


def _as_pair(item) -> tuple[float, float]:
    if hasattr(item, "rt60"):
        rt60, drr = item.rt60, item.drr
    else:
        rt60, drr = item
    return (float("nan") if rt60 is None else float(rt60),
            float("nan") if drr is None else float(drr))


def power_match(enhanced_mag: np.ndarray, reference_mag: np.ndarray) -> np.ndarray:
    """Scale enhanced magnitudes so their total power matches the reference."""
    p_enh = float(np.sum(enhanced_mag ** 2))
    p_ref = float(np.sum(reference_mag ** 2))
    if p_enh <= 0.0:
        return enhanced_mag
    return enhanced_mag * np.sqrt(p_ref / p_enh)


def lsd(enhanced: Spectrogram, reference: Spectrogram,
        match_power: bool = True, eps: float = LSD_EPS) -> float:
    """Log-spectral distortion in dB between two equally shaped spectrograms.

    Per frame, the RMS over bins of the difference of 20 log10 magnitudes
    (floored by ``eps``), averaged over frames. Magnitudes are taken in
    the max-abs-normalized domain; the enhanced side is power-matched to
    the reference first unless ``match_power`` is False.
    """
    if enhanced.data.shape != reference.data.shape:
        raise ValueError(
            f"shape mismatch: {enhanced.data.shape} vs {reference.data.shape}"
        )
    em = np.abs(enhanced.data)
    rm = np.abs(reference.data)
    if match_power:
        em = power_match(em, rm)
    diff = 20.0 * np.log10(em + eps) - 20.0 * np.log10(rm + eps)
    return float(np.mean(np.sqrt(np.mean(diff ** 2, axis=0))))
