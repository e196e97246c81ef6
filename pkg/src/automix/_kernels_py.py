"""Pure-Python reference implementation of the compressor inner loop.

Everything except the recursive branch smoother is vectorized; the
smoother itself is a data-dependent recursion and runs as a plain
Python loop, which is why the compiled twin in _kernels.pyx exists.
Both backends must produce the same output (tested to tight tolerance).
"""

from __future__ import annotations

import math

import numpy as np

# instantaneous level floor, keeps the log finite on zero samples
_LEVEL_FLOOR = 1e-10

BACKEND = "python"


def compress_signal(
    x: np.ndarray,
    fs: float,
    threshold_db: float,
    ratio: float,
    attack_s: float,
    release_s: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Feed-forward compression of a mono signal.

    Hard-knee gain computer in the log domain followed by a branching
    smoother on the gain-reduction signal: attack coefficient while the
    required reduction is rising, release while it is falling, with
    alpha = exp(-1/(tau*fs)).

    Returns
    -------
    (y, gain_reduction_db)
        Compressed signal and the smoothed per-sample gain reduction
        (>= 0 dB, applied as -gain_reduction_db).
    """
    x = np.asarray(x, dtype=np.float64)
    level_db = 20.0 * np.log10(np.maximum(np.abs(x), _LEVEL_FLOOR))
    over = level_db - threshold_db
    slope = 1.0 - 1.0 / ratio
    target = np.where(over > 0.0, over * slope, 0.0)

    alpha_a = math.exp(-1.0 / (attack_s * fs))
    alpha_r = math.exp(-1.0 / (release_s * fs))
    one_a = 1.0 - alpha_a
    one_r = 1.0 - alpha_r

    smoothed = []
    append = smoothed.append
    state = 0.0
    for v in target.tolist():
        if v > state:
            state = alpha_a * state + one_a * v
        else:
            state = alpha_r * state + one_r * v
        append(state)

    gain_reduction_db = np.array(smoothed, dtype=np.float64)
    y = x * 10.0 ** (-gain_reduction_db / 20.0)
    return y, gain_reduction_db
