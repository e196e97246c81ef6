"""Per-channel processing: fixed-layout 6-band peaking EQ, feed-forward
compressor, and loudness-matching makeup gain.

The compressor inner loop has two interchangeable backends: a compiled
extension (built from _kernels.pyx) and a pure-Python fallback. The
compiled one is picked automatically when importable; set
AUTOMIX_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

from . import _kernels_py
from .audio_io import AudioClip
from .loudness import SILENCE_LUFS, integrated_loudness

if os.environ.get("AUTOMIX_PURE_PYTHON"):
    _kernels = _kernels_py
else:
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        _kernels = _kernels_py

KERNEL_BACKEND = _kernels.BACKEND

# (center_hz, Q) of the six fixed peaking sections, applied in this order
EQ_BANDS = (
    (75.0, 1.0),
    (100.0, 0.6),
    (250.0, 0.3),
    (750.0, 0.3),
    (2500.0, 0.2),
    (7500.0, 1.0),
)

PARAMS_PER_TRACK = 10

INSTRUMENT_EQ_LIMIT_DB = 6.0
SUBGROUP_EQ_LIMIT_DB = 3.0
THRESHOLD_BOUNDS_DB = (-30.0, 0.0)
RATIO_BOUNDS = (1.0, 6.0)
ATTACK_BOUNDS_S = (0.005, 0.25)
RELEASE_BOUNDS_S = (0.005, 3.0)


class _Diagnostics:
    """Counters for silent parameter repairs, reset at will in tests."""

    def __init__(self) -> None:
        self.clamped_values = 0

    def reset(self) -> None:
        self.clamped_values = 0


diagnostics = _Diagnostics()


@dataclass(frozen=True)
class EqParams:
    """Gains in dB for the six fixed bands, low to high."""

    gains_db: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.gains_db) != len(EQ_BANDS):
            raise ValueError(f"expected {len(EQ_BANDS)} band gains, got {len(self.gains_db)}")


@dataclass(frozen=True)
class DrcParams:
    threshold_db: float
    ratio: float
    attack_s: float
    release_s: float

    def __post_init__(self) -> None:
        if self.ratio < 1.0:
            raise ValueError(f"ratio must be >= 1, got {self.ratio}")
        if self.attack_s <= 0.0 or self.release_s <= 0.0:
            raise ValueError("attack and release time constants must be positive")


@dataclass(frozen=True)
class TrackParams:
    eq: EqParams
    drc: DrcParams


def design_peaking_filter(fc_hz: float, q: float, gain_db: float, fs: float) -> np.ndarray:
    """Peaking-EQ biquad, returned as one normalized SOS row.

    Uses the standard parametric recipe: A = 10^(gain/40),
    alpha = sin(w0)/(2 Q),

        b = [1 + alpha*A, -2 cos(w0), 1 - alpha*A]
        a = [1 + alpha/A, -2 cos(w0), 1 - alpha/A]

    normalized by a0. At gain 0 the section is exactly the identity
    filter (b == a coefficient by coefficient).
    """
    if not 0.0 < fc_hz < fs / 2.0:
        raise ValueError(f"center frequency {fc_hz} Hz outside (0, {fs / 2}) at fs={fs}")
    if q <= 0.0:
        raise ValueError(f"Q must be positive, got {q}")
    a_lin = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * math.pi * fc_hz / fs
    alpha = math.sin(w0) / (2.0 * q)
    cos_w0 = math.cos(w0)

    b0 = 1.0 + alpha * a_lin
    b1 = -2.0 * cos_w0
    b2 = 1.0 - alpha * a_lin
    a0 = 1.0 + alpha / a_lin
    a1 = -2.0 * cos_w0
    a2 = 1.0 - alpha / a_lin
    return np.array([b0 / a0, b1 / a0, b2 / a0, 1.0, a1 / a0, a2 / a0])


def eq_sos(eq: EqParams, fs: float) -> np.ndarray:
    """Cascade matrix (6, 6) for scipy.signal.sosfilt."""
    return np.stack(
        [
            design_peaking_filter(fc, q, g, fs)
            for (fc, q), g in zip(EQ_BANDS, eq.gains_db)
        ]
    )


def apply_eq(clip: AudioClip, eq: EqParams) -> AudioClip:
    y = sosfilt(eq_sos(eq, clip.sample_rate), clip.samples)
    return AudioClip(clip.sample_rate, y)


def compress(clip: AudioClip, drc: DrcParams) -> AudioClip:
    y, _ = _kernels.compress_signal(
        clip.samples,
        float(clip.sample_rate),
        drc.threshold_db,
        drc.ratio,
        drc.attack_s,
        drc.release_s,
    )
    return AudioClip(clip.sample_rate, y)


def gain_reduction_db(clip: AudioClip, drc: DrcParams) -> np.ndarray:
    """Smoothed per-sample gain reduction trace, for inspection."""
    _, gr = _kernels.compress_signal(
        clip.samples,
        float(clip.sample_rate),
        drc.threshold_db,
        drc.ratio,
        drc.attack_s,
        drc.release_s,
    )
    return gr


def makeup_gain_db(before: AudioClip, after: AudioClip) -> float:
    """Gain restoring the loudness the compressor removed.

    Difference of integrated loudness before vs after compression.
    Raises on silent input, where loudness is undefined.
    """
    lb = integrated_loudness(before).integrated_lufs
    la = integrated_loudness(after).integrated_lufs
    if lb == SILENCE_LUFS or la == SILENCE_LUFS:
        raise ValueError("makeup gain undefined for silent audio")
    return lb - la


def process_track(clip: AudioClip, params: TrackParams) -> AudioClip:
    """EQ -> compressor -> makeup gain, the full per-channel chain."""
    eq_out = apply_eq(clip, params.eq)
    if params.drc.ratio == 1.0:
        # unity ratio is a bit-exact no-op, skip the loudness round trip
        return eq_out
    comp_out = compress(eq_out, params.drc)
    lb = integrated_loudness(eq_out).integrated_lufs
    la = integrated_loudness(comp_out).integrated_lufs
    if lb == SILENCE_LUFS or la == SILENCE_LUFS:
        return comp_out
    return comp_out.scaled(10.0 ** ((lb - la) / 20.0))


def stage_bounds(n_tracks: int, eq_limit_db: float) -> np.ndarray:
    """Search-space box, shape (10*n_tracks, 2).

    Per-track layout: six band gains, threshold, ratio, attack, release.
    """
    if n_tracks < 1:
        raise ValueError("need at least one track")
    per_track = [(-eq_limit_db, eq_limit_db)] * len(EQ_BANDS) + [
        THRESHOLD_BOUNDS_DB,
        RATIO_BOUNDS,
        ATTACK_BOUNDS_S,
        RELEASE_BOUNDS_S,
    ]
    return np.array(per_track * n_tracks, dtype=np.float64)


def identity_params() -> TrackParams:
    """Parameters that pass audio through untouched.

    Zero EQ gain everywhere; ratio 1 disables the compressor (threshold
    at the top of its range, time constants mid-range so the identity
    point is interior in the dimensions that still matter).
    """
    return TrackParams(
        eq=EqParams(gains_db=(0.0,) * len(EQ_BANDS)),
        drc=DrcParams(
            threshold_db=THRESHOLD_BOUNDS_DB[1],
            ratio=RATIO_BOUNDS[0],
            attack_s=0.5 * (ATTACK_BOUNDS_S[0] + ATTACK_BOUNDS_S[1]),
            release_s=0.5 * (RELEASE_BOUNDS_S[0] + RELEASE_BOUNDS_S[1]),
        ),
    )


def encode_params(params: list[TrackParams]) -> np.ndarray:
    vec = np.empty(PARAMS_PER_TRACK * len(params), dtype=np.float64)
    for t, p in enumerate(params):
        base = t * PARAMS_PER_TRACK
        vec[base : base + 6] = p.eq.gains_db
        vec[base + 6] = p.drc.threshold_db
        vec[base + 7] = p.drc.ratio
        vec[base + 8] = p.drc.attack_s
        vec[base + 9] = p.drc.release_s
    return vec


def decode_params(
    values: np.ndarray,
    n_tracks: int,
    bounds: np.ndarray | None = None,
) -> list[TrackParams]:
    """Vector -> per-track parameters, clamping anything out of range.

    Clamps are silent repairs (the optimizer keeps candidates in bounds,
    so they indicate a bug upstream); each clamped value bumps
    diagnostics.clamped_values.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (PARAMS_PER_TRACK * n_tracks,):
        raise ValueError(
            f"expected vector of length {PARAMS_PER_TRACK * n_tracks}, got shape {values.shape}"
        )
    if bounds is None:
        bounds = stage_bounds(n_tracks, INSTRUMENT_EQ_LIMIT_DB)
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (values.size, 2):
        raise ValueError(f"bounds shape {bounds.shape} does not match vector")

    clipped = np.clip(values, bounds[:, 0], bounds[:, 1])
    diagnostics.clamped_values += int(np.count_nonzero(clipped != values))

    out = []
    for t in range(n_tracks):
        base = t * PARAMS_PER_TRACK
        out.append(
            TrackParams(
                eq=EqParams(gains_db=tuple(clipped[base : base + 6])),
                drc=DrcParams(
                    threshold_db=float(clipped[base + 6]),
                    ratio=float(clipped[base + 7]),
                    attack_s=float(clipped[base + 8]),
                    release_s=float(clipped[base + 9]),
                ),
            )
        )
    return out
