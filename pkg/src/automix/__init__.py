"""automix: batch automatic mixing by masking minimization.

Loudness-normalizes a multitrack session, then searches per-track EQ
and compression settings with a particle swarm so that each track is
masked as little as possible by the rest of the mix, as judged by a
psychoacoustic masking model.
"""

from .audio_io import (
    AudioClip,
    AudioIOError,
    Session,
    SubgroupSpec,
    Track,
    read_wav,
    sum_tracks,
    write_wav,
)
from .channel_fx import (
    DrcParams,
    EqParams,
    TrackParams,
    identity_params,
    process_track,
)
from .loudness import integrated_loudness, normalize_to
from .masking import MaskingResult, MetricConfig, objective
from .pipeline import EngineConfig, MixResult, mix_flat, mix_session, mix_subgrouped
from .pso import PsoConfig, optimize
from .psycho import PsychoAnalyzer, analyze_track, get_analyzer

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "AudioIOError",
    "DrcParams",
    "EngineConfig",
    "EqParams",
    "MaskingResult",
    "MetricConfig",
    "MixResult",
    "PsoConfig",
    "PsychoAnalyzer",
    "Session",
    "SubgroupSpec",
    "Track",
    "TrackParams",
    "analyze_track",
    "get_analyzer",
    "identity_params",
    "integrated_loudness",
    "mix_flat",
    "mix_session",
    "mix_subgrouped",
    "normalize_to",
    "objective",
    "optimize",
    "process_track",
    "read_wav",
    "sum_tracks",
    "write_wav",
]
