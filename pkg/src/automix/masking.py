"""Cross-adaptive masking metric.

How much of each track does the rest of the mix render inaudible?
For track n the masker is everything else (mix minus track), analyzed
to a masking threshold T'; bands of the track whose energy is audible
on its own (above the threshold-in-quiet floor) but sits below T' are
masked, scored by their masked-to-signal ratio in dB, clamped, and
averaged over the track's active frames. The per-track scores are
aggregated into a scalar objective for the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip, sum_tracks
from .psycho import PsychoAnalyzer, get_analyzer

DBFS_EPS = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    """Knobs of the masking metric.

    t_max_db clamps a single band's masked-to-signal ratio; gate_db is
    the per-frame RMS activity gate; energy_floor is the minimum band
    energy considered at all (raised to the threshold in quiet during
    evaluation, so inaudibly quiet bands never count as masked).
    """

    t_max_db: float = 20.0
    gate_db: float = -70.0
    energy_floor: float = 1e-12

    def __post_init__(self) -> None:
        if self.t_max_db <= 0.0:
            raise ValueError("t_max_db must be positive")


@dataclass(frozen=True)
class MaskingResult:
    per_track_m: tuple[float, ...]
    m_total: float
    m_diff: float
    objective: float
    active_frames: tuple[int, ...]


def track_masking(
    esb: np.ndarray,
    thr_other: np.ndarray,
    frame_rms: np.ndarray,
    config: MetricConfig,
    band_floor: np.ndarray | float | None = None,
) -> tuple[float, int]:
    """Masking score of one track against the rest-of-mix threshold.

    Parameters
    ----------
    esb : (n_frames, n_bands) track band energies
    thr_other : (n_frames, n_bands) masking threshold of the complement
    frame_rms : (n_frames,) track frame RMS for the activity gate
    band_floor : audibility floor per band, combined with
        config.energy_floor; bands at or below the floor are ignored

    Returns
    -------
    (m, n_active)
        Mean per-frame masking over active frames (0 if none are
        active) and the number of active frames.
    """
    if esb.shape != thr_other.shape:
        raise ValueError(f"shape mismatch: {esb.shape} vs {thr_other.shape}")
    floor = config.energy_floor
    if band_floor is not None:
        floor = np.maximum(floor, band_floor)

    masked = (thr_other > esb) & (esb > floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_db = np.where(masked, 10.0 * np.log10(np.where(masked, thr_other / esb, 1.0)), 0.0)
    ratio_db = np.clip(ratio_db, 0.0, config.t_max_db)
    frame_score = ratio_db.sum(axis=1) / config.t_max_db

    rms_db = 20.0 * np.log10(np.maximum(frame_rms, DBFS_EPS))
    active = rms_db > config.gate_db
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        return 0.0, 0
    return float(frame_score[active].mean()), n_active


def cross_threshold(
    track_index: int,
    clips: list[AudioClip],
    analyzer: PsychoAnalyzer | None = None,
) -> np.ndarray:
    """Masking threshold of everything except clips[track_index]."""
    if not 0 <= track_index < len(clips):
        raise IndexError(f"track index {track_index} out of range")
    if analyzer is None:
        analyzer = get_analyzer(clips[0].sample_rate)
    mix = sum_tracks(clips)
    others = AudioClip(mix.sample_rate, mix.samples - _padded(clips[track_index], len(mix)))
    return analyzer.analyze(others).thr


def _padded(clip: AudioClip, length: int) -> np.ndarray:
    if len(clip) == length:
        return clip.samples
    out = np.zeros(length)
    out[: len(clip)] = clip.samples
    return out


def aggregate_masking(per_track_m) -> tuple[float, float, float]:
    """Scalar objective from per-track scores.

    m_total is the sum of squares (squaring punishes one badly masked
    track more than the same amount spread around); m_diff is the
    largest pairwise gap, zero with fewer than two tracks.
    """
    m = np.asarray(per_track_m, dtype=np.float64)
    if m.size == 0:
        raise ValueError("need at least one track score")
    m_total = float(np.sum(m**2))
    m_diff = float(np.max(m) - np.min(m)) if m.size > 1 else 0.0
    return m_total, m_diff, m_total + m_diff


def objective(
    clips: list[AudioClip],
    config: MetricConfig | None = None,
    analyzer: PsychoAnalyzer | None = None,
) -> MaskingResult:
    """Full masking evaluation of a candidate mix (already processed).

    Tracks are zero-padded to a common length; each is scored against
    the threshold of the mix minus itself, with the threshold in quiet
    as the audibility floor. A single-track session scores exactly 0.
    """
    if not clips:
        raise ValueError("need at least one clip")
    if config is None:
        config = MetricConfig()
    if analyzer is None:
        analyzer = get_analyzer(clips[0].sample_rate)

    mix = sum_tracks(clips)
    length = len(mix)
    floor = analyzer.qthr_sfb

    scores = []
    counts = []
    for clip in clips:
        padded = _padded(clip, length)
        own = analyzer.analyze(AudioClip(mix.sample_rate, padded))
        rest = analyzer.analyze(AudioClip(mix.sample_rate, mix.samples - padded))
        m, n_active = track_masking(own.esb, rest.thr, own.frame_rms, config, band_floor=floor)
        scores.append(m)
        counts.append(n_active)

    m_total, m_diff, total = aggregate_masking(scores)
    return MaskingResult(
        per_track_m=tuple(scores),
        m_total=m_total,
        m_diff=m_diff,
        objective=total,
        active_frames=tuple(counts),
    )
