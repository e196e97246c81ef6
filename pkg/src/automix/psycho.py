"""Psychoacoustic analysis: per-frame masking thresholds on a
scale-factor-band grid.

The analyzer follows the classic two-stage shape used by perceptual
audio coders: a windowed 1024-point FFT front end with an inter-frame
unpredictability measure, threshold partitions of roughly a third of a
critical band, convolution with a level-independent spreading function,
a tonality-steered SNR offset, a pre-echo guard, and a threshold in
quiet, finally mapped onto 21 scale-factor bands where the mixing
metric operates.

Calibration: a full-scale sine is pinned to 120 dB SPL, and the
threshold in quiet is capped at +40 dB SPL, placing the quiet floor
roughly 80 dB below full scale even at the spectrum edges where the
ear is least sensitive. Program material at working levels therefore
always dominates the floor; the floor only takes over for genuinely
inaudible content.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio_io import AudioClip, frame_signal

FFT_SIZE = 1024
HOP_SIZE = 512
N_SFB = 21

# tonal maskers push the threshold further down than noise maskers
TONAL_SNR_DB = 29.0
NOISE_SNR_DB = 6.0

FULL_SCALE_SPL_DB = 120.0
ATH_CAP_DB = 40.0

_PARTITION_MAX_BARK = 1.0 / 3.0

# scale-factor band widths, in units of fs/1152 (i.e. widths of a
# 576-line spectrum at half the FFT resolution), low band first
_SFB_WIDTHS = {
    44100: (4, 4, 4, 4, 4, 4, 6, 6, 8, 8, 10, 12, 16, 20, 24, 28, 34, 42, 50, 54, 76),
    48000: (4, 4, 4, 4, 4, 4, 6, 6, 6, 8, 10, 12, 16, 18, 22, 28, 34, 40, 46, 54, 54),
}


def bark(f_hz):
    """Critical-band rate in bark.

    z(f) = 13 atan(0.00076 f) + 3.5 atan((f/7500)^2)
    """
    f = np.asarray(f_hz, dtype=np.float64)
    return 13.0 * np.arctan(0.00076 * f) + 3.5 * np.arctan((f / 7500.0) ** 2)


def spreading(dz):
    """Prototype masking spread at a masker-to-maskee distance of dz bark.

    Positive dz masks upward. Returned as linear power weighting; values
    below -100 dB are truncated to exactly zero.
    """
    dz = np.asarray(dz, dtype=np.float64)
    tmpx = 1.05 * dz
    x = 8.0 * np.minimum((tmpx - 0.5) ** 2 - 2.0 * (tmpx - 0.5), 0.0)
    tmpy = 15.811389 + 7.5 * (tmpx + 0.474) - 17.5 * np.sqrt(1.0 + (tmpx + 0.474) ** 2)
    out = np.where(tmpy <= -100.0, 0.0, 10.0 ** ((x + tmpy) / 10.0))
    return out if out.ndim else float(out)


def threshold_in_quiet_db(f_hz):
    """Absolute threshold of hearing in dB SPL (Terhardt approximation).

    Frequencies below 20 Hz are evaluated at 20 Hz; the curve is capped
    at ATH_CAP_DB so spectrum edges cannot dominate every threshold.
    """
    f = np.maximum(np.asarray(f_hz, dtype=np.float64), 20.0)
    fk = f / 1000.0
    ath = (
        3.64 * fk**-0.8
        - 6.5 * np.exp(-0.6 * (fk - 3.3) ** 2)
        + 1e-3 * fk**4
    )
    return np.minimum(ath, ATH_CAP_DB)


def _minval_db(bval):
    # minimum SNR offset per partition: 24.5 dB at DC, shrinking by
    # 1.75 dB/bark, floored at 0 (no minimum in the top octaves)
    return np.clip(24.5 - 1.75 * np.asarray(bval, dtype=np.float64), 0.0, 24.5)


def tmn_nmt_offsets() -> tuple[float, float]:
    """(tone-masking-noise, noise-masking-tone) SNR offsets in dB."""
    return (TONAL_SNR_DB, NOISE_SNR_DB)


def snr_offset_db(tonality, minval_db):
    """SNR offset steering the threshold below the spread energy.

    Linear interpolation between the noise-masker and tone-masker
    offsets by the tonality index, never less than the per-partition
    minimum.
    """
    t = np.asarray(tonality, dtype=np.float64)
    return np.maximum(minval_db, t * TONAL_SNR_DB + (1.0 - t) * NOISE_SNR_DB)


def analysis_window(n: int = FFT_SIZE) -> np.ndarray:
    """Half-sample-offset Hann window, w(i) = 0.5 - 0.5 cos(2 pi (i+0.5)/n)."""
    i = np.arange(n, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * (i + 0.5) / n)


@dataclass(frozen=True)
class PsychoFrame:
    """Single-frame view into a PsychoFrames batch."""

    index: int
    esb: np.ndarray
    thr: np.ndarray
    tonality: np.ndarray
    frame_rms: float


class PsychoFrames:
    """Batch analysis result.

    Attributes
    ----------
    esb : (n_frames, 21) signal energy per scale-factor band
    thr : (n_frames, 21) masking threshold per scale-factor band
    tonality : (n_frames, n_partitions) tonality index per partition
    frame_rms : (n_frames,) RMS of each (unwindowed) frame
    """

    def __init__(self, sample_rate, esb, thr, tonality, frame_rms):
        self.sample_rate = sample_rate
        self.esb = esb
        self.thr = thr
        self.tonality = tonality
        self.frame_rms = frame_rms

    def __len__(self) -> int:
        return self.esb.shape[0]

    def __getitem__(self, index: int) -> PsychoFrame:
        return PsychoFrame(
            index=index,
            esb=self.esb[index],
            thr=self.thr[index],
            tonality=self.tonality[index],
            frame_rms=float(self.frame_rms[index]),
        )


class PsychoAnalyzer:
    """Masking-threshold analyzer, bound to one sample rate.

    Construction precomputes everything rate-dependent: the threshold
    partitions (grouping consecutive FFT lines until a partition would
    span more than 1/3 bark), the partition spreading matrix and its
    column renormalization, the threshold in quiet, and the mapping
    from FFT lines onto the 21 scale-factor bands.
    """

    def __init__(self, sample_rate: int):
        if sample_rate not in _SFB_WIDTHS:
            raise ValueError(f"unsupported sample rate {sample_rate}")
        self.sample_rate = int(sample_rate)
        self.window = analysis_window()
        # calibration: energy of a windowed full-scale sine at bin center
        self._p_fullscale = (self.window.sum() / 2.0) ** 2

        n_lines = FFT_SIZE // 2 + 1
        f_line = np.arange(n_lines) * (sample_rate / FFT_SIZE)
        z_line = bark(f_line)

        starts = [0]
        for w in range(1, n_lines):
            if z_line[w] - z_line[starts[-1]] > _PARTITION_MAX_BARK:
                starts.append(w)
        self.partition_starts = np.asarray(starts, dtype=np.intp)
        self.n_partitions = len(starts)
        ends = np.append(self.partition_starts[1:], n_lines)
        self.nlines = (ends - self.partition_starts).astype(np.float64)
        self.partition_of_line = np.repeat(
            np.arange(self.n_partitions), ends - self.partition_starts
        )
        self.bval = np.array(
            [np.median(z_line[s:e]) for s, e in zip(self.partition_starts, ends)]
        )

        dz = self.bval[None, :] - self.bval[:, None]  # [masker, maskee]
        self.spread_matrix = spreading(dz)
        self.renorm = 1.0 / self.spread_matrix.sum(axis=0)
        self.minval_db = _minval_db(self.bval)

        qthr_line = self._p_fullscale * 10.0 ** (
            (threshold_in_quiet_db(f_line) - FULL_SCALE_SPL_DB) / 10.0
        )
        self.qthr_partition = np.add.reduceat(qthr_line, self.partition_starts)

        widths = np.asarray(_SFB_WIDTHS[sample_rate], dtype=np.float64)
        upper_hz = np.cumsum(widths) * (sample_rate / 1152.0)
        sfb_of_line = np.searchsorted(upper_hz, f_line, side="right")
        self.sfb_of_line = np.minimum(sfb_of_line, N_SFB - 1)  # top band runs to Nyquist
        self.sfb_starts = np.searchsorted(self.sfb_of_line, np.arange(N_SFB))

        # threshold in quiet on the scale-factor-band grid, computed by
        # the same spread-lines-evenly mapping used for real thresholds
        # so silence analyzes to exactly this floor
        self.qthr_sfb = np.add.reduceat(
            self.qthr_partition[self.partition_of_line] / self.nlines[self.partition_of_line],
            self.sfb_starts,
        )

    def analyze(self, clip: AudioClip) -> PsychoFrames:
        """Run the model over a clip.

        Frames are FFT_SIZE long with HOP_SIZE hop, zero-padded at the
        tail; an empty clip yields a single all-zero frame.
        """
        if clip.sample_rate != self.sample_rate:
            raise ValueError(
                f"clip rate {clip.sample_rate} does not match analyzer rate {self.sample_rate}"
            )
        frames = frame_signal(clip, FFT_SIZE, HOP_SIZE)
        if frames.shape[0] == 0:
            frames = np.zeros((1, FFT_SIZE))
        n_frames = frames.shape[0]

        spectrum = np.fft.rfft(frames * self.window, axis=1)
        r = np.abs(spectrum)
        phi = np.angle(spectrum)
        energy = r**2

        # unpredictability: distance between the observed line and a
        # linear extrapolation of the previous two frames, in the
        # complex plane, normalized by the magnitude sum
        c = np.ones_like(r)  # no history: fully unpredictable
        if n_frames > 2:
            r1, r2 = r[1:-1], r[:-2]
            phi1, phi2 = phi[1:-1], phi[:-2]
            r_pred = 2.0 * r1 - r2
            phi_pred = 2.0 * phi1 - phi2
            dist = np.sqrt(
                r[2:] ** 2
                + r_pred**2
                - 2.0 * r[2:] * r_pred * np.cos(phi[2:] - phi_pred)
            )
            denom = r[2:] + np.abs(r_pred)
            with np.errstate(invalid="ignore"):
                c[2:] = np.where(denom > 0.0, dist / denom, 0.0)
            np.clip(c[2:], 0.0, 1.0, out=c[2:])

        e_part = np.add.reduceat(energy, self.partition_starts, axis=1)
        ce_part = np.add.reduceat(c * energy, self.partition_starts, axis=1)

        ecb = e_part @ self.spread_matrix
        ct = ce_part @ self.spread_matrix
        with np.errstate(invalid="ignore", divide="ignore"):
            cb = np.where(ecb > 0.0, ct / ecb, 0.0)
            tonality = np.where(
                cb > 0.0, np.clip(-0.299 - 0.43 * np.log(cb), 0.0, 1.0), 0.0
            )

        snr_db = snr_offset_db(tonality, self.minval_db)
        nb = ecb * self.renorm * 10.0 ** (-snr_db / 10.0)

        # pre-echo guard: a threshold may not exceed 2x / 16x the raw
        # threshold of the previous one / two frames; missing history
        # is treated as infinitely permissive
        pad = np.full((1, self.n_partitions), np.inf)
        nb_prev1 = np.vstack([pad, nb[:-1]])
        nb_prev2 = np.vstack([pad, pad, nb[:-2]]) if n_frames > 1 else pad
        thr_part = np.maximum(
            self.qthr_partition,
            np.minimum(nb, np.minimum(2.0 * nb_prev1, 16.0 * nb_prev2)),
        )

        thr_line = (
            thr_part[:, self.partition_of_line] / self.nlines[self.partition_of_line]
        )
        esb = np.add.reduceat(energy, self.sfb_starts, axis=1)
        thr_sfb = np.add.reduceat(thr_line, self.sfb_starts, axis=1)

        frame_rms = np.sqrt(np.mean(frames**2, axis=1))
        return PsychoFrames(self.sample_rate, esb, thr_sfb, tonality, frame_rms)


@lru_cache(maxsize=4)
def get_analyzer(sample_rate: int) -> PsychoAnalyzer:
    return PsychoAnalyzer(sample_rate)


def analyze_track(clip: AudioClip) -> PsychoFrames:
    """Analyze a clip with a cached analyzer for its sample rate."""
    return get_analyzer(clip.sample_rate).analyze(clip)


def dump_frames_csv(frames: PsychoFrames, path) -> None:
    """Debug dump: one row per (frame, band) with energy and threshold."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "sb", "esb", "thr"])
        for t in range(len(frames)):
            for sb in range(N_SFB):
                writer.writerow(
                    [t, sb, repr(float(frames.esb[t, sb])), repr(float(frames.thr[t, sb]))]
                )
