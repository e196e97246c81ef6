"""Integrated loudness measurement and normalization (ITU-R BS.1770-2).

The two K-weighting stages are re-derived from the analog prototype for
whatever sample rate the clip uses, instead of hard-coding the 48 kHz
coefficient table from the standard. Gating follows the -2 revision:
400 ms blocks at 75% overlap, absolute gate at -70 LKFS, relative gate
10 LU below the first-stage mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio_io import AudioClip

# Analog prototype of the K-weighting chain. The standard tabulates the
# digital coefficients at 48 kHz only; these continuous-time parameters
# reproduce that table through the bilinear transform and stay exact at
# 44.1 kHz as well.
_SHELF_F0 = 1681.974450955533
_SHELF_GAIN_DB = 3.999843853973347
_SHELF_Q = 0.7071752369554196
_HIPASS_F0 = 38.13547087602444
_HIPASS_Q = 0.5003270373238773

BLOCK_S = 0.400
OVERLAP = 0.75
ABSOLUTE_GATE_LKFS = -70.0
RELATIVE_GATE_LU = -10.0
_OFFSET = -0.691  # calibration term from the standard

SILENCE_LUFS = float("-inf")


@dataclass(frozen=True)
class LoudnessReading:
    integrated_lufs: float
    gated_block_count: int
    ungated_lufs: float


# shelf band-gain exponent: places the transition gain so the digital
# shelf reproduces the standard's tabulated 48 kHz response exactly
_SHELF_BAND_EXP = 0.4996667741545416


def _high_shelf_ba(fs: float) -> tuple[np.ndarray, np.ndarray]:
    k = math.tan(math.pi * _SHELF_F0 / fs)
    vh = 10.0 ** (_SHELF_GAIN_DB / 20.0)
    vb = vh**_SHELF_BAND_EXP
    d = 1.0 + k / _SHELF_Q + k * k
    b = np.array(
        [
            (vh + vb * k / _SHELF_Q + k * k) / d,
            2.0 * (k * k - vh) / d,
            (vh - vb * k / _SHELF_Q + k * k) / d,
        ]
    )
    a = np.array([1.0, 2.0 * (k * k - 1.0) / d, (1.0 - k / _SHELF_Q + k * k) / d])
    return b, a


def _rlb_highpass_ba(fs: float) -> tuple[np.ndarray, np.ndarray]:
    k = math.tan(math.pi * _HIPASS_F0 / fs)
    d = 1.0 + k / _HIPASS_Q + k * k
    # the numerator stays unnormalized [1, -2, 1]; the small resulting
    # passband offset is what the -0.691 calibration term absorbs
    b = np.array([1.0, -2.0, 1.0])
    a = np.array([1.0, 2.0 * (k * k - 1.0) / d, (1.0 - k / _HIPASS_Q + k * k) / d])
    return b, a


def k_weighting_stages(fs: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Both K-filter stages as (b, a) pairs for the given sample rate."""
    return [_high_shelf_ba(fs), _rlb_highpass_ba(fs)]


def k_weight(clip: AudioClip) -> AudioClip:
    """Apply the two-stage K-weighting (shelf then RLB high-pass)."""
    y = clip.samples
    for b, a in k_weighting_stages(clip.sample_rate):
        y = signal.lfilter(b, a, y)
    return AudioClip(clip.sample_rate, y)


def _block_powers(clip: AudioClip) -> np.ndarray:
    fs = clip.sample_rate
    block = int(round(BLOCK_S * fs))
    hop = int(round(block * (1.0 - OVERLAP)))
    n = len(clip)
    if n < block:
        raise ValueError(
            f"clip too short for loudness gating: {n / fs:.3f} s < {BLOCK_S} s"
        )
    weighted = k_weight(clip).samples
    n_blocks = (n - block) // hop + 1
    sq = weighted * weighted
    csum = np.concatenate(([0.0], np.cumsum(sq)))
    starts = np.arange(n_blocks) * hop
    return (csum[starts + block] - csum[starts]) / block


def _lufs(mean_power: float) -> float:
    if mean_power <= 0.0:
        return SILENCE_LUFS
    return _OFFSET + 10.0 * math.log10(mean_power)


def integrated_loudness(clip: AudioClip) -> LoudnessReading:
    """Gated integrated loudness of a clip.

    Returns
    -------
    LoudnessReading
        integrated_lufs is -inf when every block falls below the
        absolute gate (digital silence or near it).

    Raises
    ------
    ValueError
        If the clip is shorter than one 400 ms gating block.
    """
    powers = _block_powers(clip)
    ungated = _lufs(float(powers.mean()))

    block_lufs = np.full(powers.size, SILENCE_LUFS)
    pos = powers > 0.0
    block_lufs[pos] = _OFFSET + 10.0 * np.log10(powers[pos])

    abs_gated = powers[block_lufs > ABSOLUTE_GATE_LKFS]
    if abs_gated.size == 0:
        return LoudnessReading(SILENCE_LUFS, 0, ungated)

    relative_threshold = _lufs(float(abs_gated.mean())) + RELATIVE_GATE_LU
    keep = (block_lufs > ABSOLUTE_GATE_LKFS) & (block_lufs > relative_threshold)
    if not keep.any():
        return LoudnessReading(SILENCE_LUFS, 0, ungated)

    return LoudnessReading(
        _lufs(float(powers[keep].mean())), int(keep.sum()), ungated
    )


def normalize_to(clip: AudioClip, target_lufs: float) -> tuple[AudioClip, float]:
    """Scale a clip so its integrated loudness lands on the target.

    Returns the scaled clip and the gain applied in dB. Silence cannot
    be normalized and raises.
    """
    measured = integrated_loudness(clip).integrated_lufs
    if measured == SILENCE_LUFS:
        raise ValueError("cannot normalize silence")
    gain_db = target_lufs - measured
    return clip.scaled(10.0 ** (gain_db / 20.0)), gain_db
