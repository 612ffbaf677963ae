"""RT60 and DRR estimation from an impulse-response waveform.

RT60 comes from Schroeder's backward-integrated energy decay curve: a
line is fitted by least squares to segments of the dB curve, candidate
segments are enumerated between the point where the curve has dropped
5 dB below its value at the direct-path peak and the point 50 ms after
the peak, each segment ends where the curve has fallen a further 5 dB,
and the fit with the largest |Pearson correlation| wins. RT60 is -60/k
for the winning slope k in dB/s.

DRR is the energy within +/-2.5 ms of the direct-path peak over the
energy everywhere else, in dB, capped when the tail energy vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .stft import Waveform

EDC_DB_FLOOR = -120.0
DRR_CAP_DB = 80.0


class InsufficientDecayError(ValueError):
    """The decay curve never spans the range needed for a slope fit."""


@dataclass
class EdcCurve:
    """Backward-integrated energy decay curve, linear and dB forms."""

    values: np.ndarray
    db: np.ndarray

    @property
    def total_energy(self) -> float:
        return float(self.values[0])


@dataclass
class AcousticParams:
    """Estimated room parameters; fields are None when not computed."""

    rt60: float | None = None
    drr: float | None = None
    fit_start: int | None = None
    fit_end: int | None = None
    pearson_r: float | None = None


def edc(h: Waveform) -> EdcCurve:
    """Schroeder integration: reverse cumulative sum of squared samples."""
    energy = np.cumsum(h.samples[::-1] ** 2)[::-1]
    total = energy[0]
    if total > 0.0:
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(energy / total)
        db = np.maximum(db, EDC_DB_FLOOR)
    else:
        db = np.full_like(energy, EDC_DB_FLOOR)
    return EdcCurve(energy, db)


def estimate_rt60(h: Waveform, fs: int | None = None,
                  start_window_db: float = 5.0,
                  max_start_delay: float = 0.05,
                  end_drop_db: float = 5.0,
                  start_stride: float = 0.001) -> AcousticParams:
    """Reverberation time from the decay-curve slope.

    Parameters
    ----------
    h : Waveform
        Impulse response with a detectable direct-path peak (global
        absolute maximum).
    fs : int, optional
        Sample rate override; defaults to the waveform's.
    start_window_db, max_start_delay, end_drop_db : float
        Fitting heuristics: candidate fit starts lie between the sample
        where the decay curve is ``start_window_db`` below its value at
        the peak and the sample ``max_start_delay`` seconds after the
        peak; each fit ends at the first sample ``end_drop_db`` below its
        start.
    start_stride : float
        Candidate spacing in seconds.

    Raises
    ------
    InsufficientDecayError
        If no candidate segment achieves the required decay.
    """
    if fs is None:
        fs = h.sample_rate
    curve = edc(h)
    db = curve.db
    n = db.size
    peak = int(np.argmax(np.abs(h.samples)))

    below = np.nonzero(db[peak:] <= db[peak] - start_window_db)[0]
    if below.size == 0:
        raise InsufficientDecayError(
            "insufficient decay range: curve never drops "
            f"{start_window_db} dB below the direct-path level"
        )
    n5 = peak + int(below[0])
    n50 = peak + int(round(max_start_delay * fs))
    lo, hi = min(n5, n50), max(n5, n50)
    hi = min(hi, n - 2)
    stride = max(1, int(round(start_stride * fs)))

    best = None
    for s in range(lo, hi + 1, stride):
        target = db[s] - end_drop_db
        rel = np.nonzero(db[s:] <= target)[0]
        if rel.size == 0:
            continue
        e = s + int(rel[0])
        if e - s < 2:
            continue
        x = np.arange(s, e + 1) / fs
        fit = stats.linregress(x, db[s: e + 1])
        if not np.isfinite(fit.rvalue) or fit.slope >= 0.0:
            continue
        if best is None or abs(fit.rvalue) > abs(best[0]):
            best = (fit.rvalue, fit.slope, s, e)
    if best is None:
        raise InsufficientDecayError(
            "insufficient decay range: no fit interval reaches "
            f"{end_drop_db} dB of attenuation"
        )
    r, slope, s, e = best
    return AcousticParams(rt60=-60.0 / slope, fit_start=s, fit_end=e,
                          pearson_r=float(r))


def estimate_drr(h: Waveform, fs: int | None = None,
                 direct_window: float = 0.0025,
                 cap_db: float = DRR_CAP_DB,
                 power_floor: float = 1e-10) -> AcousticParams:
    """Direct-to-reverberant energy ratio in dB.

    The direct window spans ``direct_window`` seconds on each side of the
    absolute peak; everything outside is reverberant energy. When the
    reverberant energy falls below ``power_floor`` the configured cap is
    returned (an isolated impulse has no meaningful finite DRR).
    """
    if fs is None:
        fs = h.sample_rate
    x = h.samples
    peak = int(np.argmax(np.abs(x)))
    spread = int(round(direct_window * fs))
    a = max(0, peak - spread)
    b = min(x.size, peak + spread + 1)
    direct = float(np.sum(x[a:b] ** 2))
    rest = float(np.sum(x ** 2)) - direct
    if rest < power_floor:
        return AcousticParams(drr=cap_db)
    return AcousticParams(drr=10.0 * np.log10(direct / rest))
