"""PCM audio I/O, the session model, and framing/summation primitives.

The engine is mono throughout: multichannel input is averaged down to a
single channel at ingest and everything downstream works on 1-D float64
sample arrays at nominal full scale +/-1.0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SUPPORTED_RATES = (44100, 48000)

INSTRUMENT_CLASSES = ("drums", "vox", "bass", "keys", "guitars", "other")

# WAVE format tags we accept
_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE


class AudioIOError(Exception):
    """Unreadable, unwritable or unsupported audio file."""


@dataclass(frozen=True)
class AudioClip:
    """Mono signal carrier: immutable sample array plus its sample rate.

    Parameters
    ----------
    sample_rate : int
        Samples per second, one of 44100 or 48000.
    samples : np.ndarray
        1-D float64 array, nominal full scale +/-1.0. Values outside
        that range are legal on the float path and only saturate at
        PCM export.
    """

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate not in SUPPORTED_RATES:
            raise ValueError(
                f"unsupported sample rate {self.sample_rate} "
                f"(supported: {SUPPORTED_RATES})"
            )
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be 1-D (mono)")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain_linear: float) -> "AudioClip":
        return AudioClip(self.sample_rate, self.samples * gain_linear)


@dataclass(frozen=True)
class Track:
    id: str
    name: str
    clip: AudioClip
    instrument_class: str
    is_vocal: bool = field(default=False)

    def __post_init__(self):
        if self.instrument_class not in INSTRUMENT_CLASSES:
            raise ValueError(f"unknown instrument class {self.instrument_class!r}")
        # vocal flag is tied to the class, not free-standing
        if self.is_vocal != (self.instrument_class == "vox"):
            raise ValueError(
                f"track {self.id!r}: is_vocal must be true exactly when "
                f"instrument_class is 'vox'"
            )


@dataclass(frozen=True)
class SubgroupSpec:
    name: str
    member_ids: tuple[str, ...]
    is_vocal_group: bool = False

    def __post_init__(self):
        object.__setattr__(self, "member_ids", tuple(self.member_ids))
        if not self.member_ids:
            raise ValueError(f"subgroup {self.name!r} has no members")


@dataclass(frozen=True)
class Session:
    tracks: tuple[Track, ...]
    subgroups: tuple[SubgroupSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "subgroups", tuple(self.subgroups))
        ids = [t.id for t in self.tracks]
        if len(set(ids)) != len(ids):
            raise ValueError("track ids must be unique within a session")
        rates = {t.clip.sample_rate for t in self.tracks}
        if len(rates) > 1:
            raise ValueError(f"tracks use mixed sample rates {sorted(rates)}")
        if self.subgroups:
            assigned = [m for g in self.subgroups for m in g.member_ids]
            if len(set(assigned)) != len(assigned):
                raise ValueError("a track id appears in more than one subgroup")
            missing = set(ids) - set(assigned)
            if missing:
                raise ValueError(
                    f"tracks not assigned to any subgroup: {sorted(missing)}"
                )
            unknown = set(assigned) - set(ids)
            if unknown:
                raise ValueError(f"subgroup members not in session: {sorted(unknown)}")

    @property
    def sample_rate(self) -> int:
        return self.tracks[0].clip.sample_rate

    def track_by_id(self, track_id: str) -> Track:
        for t in self.tracks:
            if t.id == track_id:
                return t
        raise KeyError(track_id)


def read_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono AudioClip.

    Accepts PCM 16/24-bit and IEEE float32, 1 or 2 channels. Stereo is
    downmixed by per-sample channel average. Integer samples are scaled
    so that the most negative code maps to -1.0 (16-bit: /32768).

    Raises
    ------
    AudioIOError
        On unreadable files, unsupported encodings and unsupported
        sample rates, each reported with the offending path.
    """
    path = str(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise AudioIOError(f"{path}: cannot read file: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioIOError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise AudioIOError(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise AudioIOError(f"{path}: malformed fmt chunk")

    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _FMT_EXTENSIBLE:
        if len(fmt) < 26:
            raise AudioIOError(f"{path}: malformed extensible fmt chunk")
        # first two bytes of the SubFormat GUID carry the real tag
        (tag,) = struct.unpack_from("<H", fmt, 24)

    if channels not in (1, 2):
        raise AudioIOError(f"{path}: unsupported channel count {channels}")
    if rate not in SUPPORTED_RATES:
        raise AudioIOError(f"{path}: unsupported sample rate {rate}")

    if tag == _FMT_PCM and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif tag == _FMT_PCM and bits == 24:
        raw = np.frombuffer(payload, dtype=np.uint8)
        raw = raw[: (raw.size // 3) * 3].reshape(-1, 3)
        # sign-extend 3-byte little-endian into int32
        as_int = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
        samples = as_int.astype(np.float64) / 8388608.0
    elif tag == _FMT_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise AudioIOError(
            f"{path}: unsupported encoding (format tag {tag}, {bits} bit)"
        )

    if channels == 2:
        samples = samples[: (samples.size // 2) * 2].reshape(-1, 2).mean(axis=1)

    return AudioClip(rate, samples)


def write_wav(clip: AudioClip, path, bit_depth="float32") -> int:
    """Write a clip as RIFF/WAVE at 16, 24 or float32 bit depth.

    Integer depths saturate out-of-range samples at full scale; the
    number of samples that exceeded +/-1.0 is returned as the clip
    count (always 0 on the float path).
    """
    path = str(path)
    x = clip.samples
    clipped = 0

    if bit_depth == 16:
        clipped = int(np.count_nonzero(np.abs(x) > 1.0))
        codes = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
        payload = codes.tobytes()
        bits, tag = 16, _FMT_PCM
    elif bit_depth == 24:
        clipped = int(np.count_nonzero(np.abs(x) > 1.0))
        codes = np.clip(np.rint(x * 8388608.0), -8388608, 8388607).astype(np.int32)
        b = np.empty((codes.size, 3), dtype=np.uint8)
        b[:, 0] = codes & 0xFF
        b[:, 1] = (codes >> 8) & 0xFF
        b[:, 2] = (codes >> 16) & 0xFF
        payload = b.tobytes()
        bits, tag = 24, _FMT_PCM
    elif bit_depth == "float32":
        payload = x.astype("<f4").tobytes()
        bits, tag = 32, _FMT_FLOAT
    else:
        raise ValueError(f"unsupported bit depth {bit_depth!r}")

    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        1,
        clip.sample_rate,
        clip.sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(payload),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise AudioIOError(f"{path}: cannot write file: {exc}") from exc
    return clipped


def frame_signal(clip: AudioClip, frame_len: int, hop: int) -> np.ndarray:
    """Slice a clip into overlapping frames, zero-padding the tail.

    Frame k covers samples [k*hop, k*hop + frame_len); the frame count
    is ceil(len/hop), so every sample belongs to at least one frame.

    Returns
    -------
    np.ndarray
        Array of shape (n_frames, frame_len).
    """
    if not frame_len >= hop >= 1:
        raise ValueError("need frame_len >= hop >= 1")
    n = len(clip)
    if n == 0:
        return np.empty((0, frame_len), dtype=np.float64)
    n_frames = -(-n // hop)  # ceil
    padded = np.zeros((n_frames - 1) * hop + frame_len, dtype=np.float64)
    padded[:n] = clip.samples
    stride = padded.strides[0]
    frames = np.lib.stride_tricks.as_strided(
        padded, shape=(n_frames, frame_len), strides=(hop * stride, stride)
    )
    return frames.copy()


def sum_tracks(clips: list[AudioClip]) -> AudioClip:
    """Elementwise sum; shorter clips count as zero-padded, no normalization."""
    if not clips:
        raise ValueError("sum_tracks needs at least one clip")
    rates = {c.sample_rate for c in clips}
    if len(rates) > 1:
        raise ValueError(f"cannot sum clips with mixed sample rates {sorted(rates)}")
    out = np.zeros(max(len(c) for c in clips), dtype=np.float64)
    for c in clips:
        out[: len(c)] += c.samples
    return AudioClip(clips[0].sample_rate, out)
