import json

import numpy as np
import pytest
from scipy import signal as sps

from automix import AudioClip, write_wav

FS = 44100


def make_sine(freq_hz, level_dbfs=0.0, seconds=2.0, fs=FS):
    t = np.arange(int(fs * seconds)) / fs
    return AudioClip(fs, 10.0 ** (level_dbfs / 20.0) * np.sin(2.0 * np.pi * freq_hz * t))


def make_noise(level_rms_dbfs=-20.0, seconds=2.0, fs=FS, seed=0, hop_aligned=False):
    n = int(fs * seconds)
    if hop_aligned:
        n -= n % 512
    x = np.random.default_rng(seed).standard_normal(n)
    x *= 10.0 ** (level_rms_dbfs / 20.0)
    return AudioClip(fs, x)


def make_band_noise(lo_hz, hi_hz, level_rms_dbfs, seconds=2.0, fs=FS, seed=0, hop_aligned=True):
    """Butterworth-bandpassed noise at an exact RMS level."""
    n = int(fs * seconds)
    if hop_aligned:
        n -= n % 512
    x = np.random.default_rng(seed).standard_normal(n)
    sos = sps.butter(8, [lo_hz / (fs / 2), hi_hz / (fs / 2)], btype="band", output="sos")
    y = sps.sosfilt(sos, x)
    y *= 10.0 ** (level_rms_dbfs / 20.0) / np.sqrt(np.mean(y**2))
    return AudioClip(fs, y)


def write_session_dir(dir_path):
    """Write a 4-track session (with subgroups) to disk; returns its manifest path."""

    def shaped(seed, lo, hi):
        clip = make_band_noise(lo, hi, -18.0, seconds=2.0, seed=seed)
        return clip

    specs = [
        ("kick", 11, 50, 220, "drums"),
        ("snare", 12, 150, 2500, "drums"),
        ("bass", 13, 60, 500, "bass"),
        ("lead", 14, 200, 4000, "vox"),
    ]
    for name, seed, lo, hi, _cls in specs:
        write_wav(shaped(seed, lo, hi), dir_path / f"{name}.wav", bit_depth="float32")
    manifest = {
        "sample_rate_expected": FS,
        "tracks": [{"path": f"{name}.wav", "class": cls} for name, _, _, _, cls in specs],
        "subgroups": [
            {"name": "drums", "members": ["kick", "snare"]},
            {"name": "bass", "members": ["bass"]},
            {"name": "vocals", "members": ["lead"], "vocal": True},
        ],
        "pso": {"swarm": 5, "max_iters": 3, "seed": 9},
    }
    path = dir_path / "session.json"
    path.write_text(json.dumps(manifest))
    return path


@pytest.fixture
def session_dir(tmp_path):
    return write_session_dir(tmp_path)
