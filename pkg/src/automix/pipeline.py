"""Mix orchestration: normalize, optimize, render.

Two entry points share the same stage machinery. mix_flat optimizes
every track in one swarm; mix_subgrouped runs one swarm per subgroup,
renders and re-normalizes each subgroup stem, then runs a final swarm
across the stems with tighter EQ bounds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

from .audio_io import AudioClip, Session, Track, sum_tracks
from .channel_fx import (
    INSTRUMENT_EQ_LIMIT_DB,
    SUBGROUP_EQ_LIMIT_DB,
    TrackParams,
    decode_params,
    encode_params,
    identity_params,
    process_track,
    stage_bounds,
)
from .loudness import SILENCE_LUFS, integrated_loudness, normalize_to
from .masking import MetricConfig, objective
from .pso import PsoConfig, PsoTrace, optimize
from .psycho import get_analyzer

TRACK_TARGET_LUFS = -24.0
VOCAL_TARGET_LUFS = -18.0
MIN_ANALYSIS_S = 0.4  # loudness gating needs at least one block


@dataclass(frozen=True)
class EngineConfig:
    metric: MetricConfig = field(default_factory=MetricConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    analysis_start_s: float = 0.0
    analysis_length_s: float | None = None


@dataclass
class StageReport:
    stage: str
    track_count: int
    iterations: int
    initial_f: float
    final_f: float
    m_before: tuple[float, ...]
    m_after: tuple[float, ...]
    trace: PsoTrace
    params: dict[str, TrackParams]
    note: str = ""


@dataclass
class MixResult:
    mix: AudioClip
    stage_reports: list[StageReport]
    final_params: dict[str, TrackParams]
    stems: dict[str, AudioClip]


def _normalize(clip: AudioClip, name: str, vocal: bool) -> AudioClip:
    target = VOCAL_TARGET_LUFS if vocal else TRACK_TARGET_LUFS
    if integrated_loudness(clip).integrated_lufs == SILENCE_LUFS:
        warnings.warn(f"'{name}' is silent, skipping loudness normalization")
        return clip
    normalized, _ = normalize_to(clip, target)
    return normalized


def _analysis_slice(clip: AudioClip, config: EngineConfig) -> AudioClip:
    start = int(round(config.analysis_start_s * clip.sample_rate))
    if start >= len(clip):
        raise ValueError(
            f"analysis segment starts at {config.analysis_start_s} s, past the end of a "
            f"{clip.duration_s:.2f} s clip"
        )
    if config.analysis_length_s is None:
        segment = clip.samples[start:]
    else:
        n = int(round(config.analysis_length_s * clip.sample_rate))
        segment = clip.samples[start : start + n]
    if len(segment) < int(MIN_ANALYSIS_S * clip.sample_rate):
        raise ValueError(f"analysis segment shorter than {MIN_ANALYSIS_S} s")
    if start == 0 and len(segment) == len(clip):
        return clip
    return AudioClip(clip.sample_rate, segment)


def _run_stage(
    stage_name: str,
    names: list[str],
    eval_clips: list[AudioClip],
    eq_limit_db: float,
    config: EngineConfig,
    stage_index: int,
) -> tuple[list[TrackParams], StageReport]:
    n = len(eval_clips)
    analyzer = get_analyzer(eval_clips[0].sample_rate)
    identity = [identity_params()] * n
    identity_vec = encode_params(identity)

    if n == 1:
        result = objective([process_track(eval_clips[0], identity[0])], config.metric, analyzer)
        return identity, StageReport(
            stage=stage_name,
            track_count=1,
            iterations=0,
            initial_f=result.objective,
            final_f=result.objective,
            m_before=result.per_track_m,
            m_after=result.per_track_m,
            trace=PsoTrace(stop_reason="skipped"),
            params=dict(zip(names, identity)),
            note="single track, optimization skipped",
        )

    bounds = stage_bounds(n, eq_limit_db)

    def evaluate(vector):
        params = decode_params(vector, n, bounds)
        processed = [process_track(c, p) for c, p in zip(eval_clips, params)]
        return objective(processed, config.metric, analyzer)

    identity_result = evaluate(identity_vec)
    # one independent random stream per stage
    stage_pso = replace(config.pso, rng_seed=config.pso.rng_seed + stage_index)
    best, trace = optimize(evaluate, bounds, stage_pso, initial=identity_vec)
    params = decode_params(best, n, bounds)
    best_result = trace.best_result

    report = StageReport(
        stage=stage_name,
        track_count=n,
        iterations=len(trace.rows),
        initial_f=trace.rows[0].best_f,
        final_f=trace.rows[-1].best_f,
        m_before=identity_result.per_track_m,
        m_after=tuple(best_result.per_track_m),
        trace=trace,
        params=dict(zip(names, params)),
    )
    return params, report


def render(clips: list[AudioClip], params: list[TrackParams]) -> AudioClip:
    """Process each clip with its parameters and sum."""
    if len(clips) != len(params):
        raise ValueError("one parameter set per clip required")
    return sum_tracks([process_track(c, p) for c, p in zip(clips, params)])


def _prepare(tracks: list[Track], config: EngineConfig) -> tuple[list[AudioClip], list[AudioClip]]:
    full = [_normalize(t.clip, t.id, t.is_vocal) for t in tracks]
    return full, [_analysis_slice(c, config) for c in full]


def mix_flat(session: Session, config: EngineConfig | None = None) -> MixResult:
    """Single-stage mix: one swarm over all tracks."""
    if config is None:
        config = EngineConfig()
    full, eval_clips = _prepare(list(session.tracks), config)
    names = [t.id for t in session.tracks]
    params, report = _run_stage(
        "All Tracks", names, eval_clips, INSTRUMENT_EQ_LIMIT_DB, config, stage_index=0
    )
    mix = render(full, params)
    return MixResult(
        mix=mix,
        stage_reports=[report],
        final_params=dict(zip(names, params)),
        stems={},
    )


def mix_subgrouped(session: Session, config: EngineConfig | None = None) -> MixResult:
    """Hierarchical mix: per-subgroup swarms, then a swarm over stems.

    Subgroup stems are re-normalized before the final stage (vocal
    groups to the vocal target); the final stage searches a narrower
    EQ range, leaving within-group balance to the first pass.
    """
    if config is None:
        config = EngineConfig()
    if not session.subgroups:
        raise ValueError("session declares no subgroups; use mix_flat")

    reports: list[StageReport] = []
    stems: dict[str, AudioClip] = {}
    stage_index = 0

    for group in session.subgroups:
        members = [session.track_by_id(tid) for tid in group.member_ids]
        full, eval_clips = _prepare(members, config)
        names = [t.id for t in members]
        params, report = _run_stage(
            group.name, names, eval_clips, INSTRUMENT_EQ_LIMIT_DB, config, stage_index
        )
        stage_index += 1
        reports.append(report)
        stem = render(full, params)
        stems[group.name] = _normalize(stem, group.name, group.is_vocal_group)

    stem_names = list(stems)
    stem_clips = [stems[n] for n in stem_names]
    eval_stems = [_analysis_slice(c, config) for c in stem_clips]
    final_params_list, final_report = _run_stage(
        "Stem Mix", stem_names, eval_stems, SUBGROUP_EQ_LIMIT_DB, config, stage_index
    )
    reports.append(final_report)
    mix = render(stem_clips, final_params_list)
    return MixResult(
        mix=mix,
        stage_reports=reports,
        final_params=dict(zip(stem_names, final_params_list)),
        stems=stems,
    )


def mix_session(session: Session, config: EngineConfig | None = None, use_subgroups: bool = True) -> MixResult:
    """Dispatch on whether the session declares subgroups."""
    if use_subgroups and session.subgroups:
        return mix_subgrouped(session, config)
    return mix_flat(session, config)
