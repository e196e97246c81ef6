# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled compressor inner loop.

Same contract as _kernels_py.compress_signal; the branching smoother is
a per-sample recursion, so it lives here as a nogil C loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log10, pow

cnp.import_array()

BACKEND = "cython"

DEF LEVEL_FLOOR = 1e-10


def compress_signal(x, double fs, double threshold_db, double ratio,
                    double attack_s, double release_s):
    # const view: clip buffers are immutable
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    y = np.empty(n, dtype=np.float64)
    gr = np.empty(n, dtype=np.float64)

    cdef double alpha_a = exp(-1.0 / (attack_s * fs))
    cdef double alpha_r = exp(-1.0 / (release_s * fs))
    cdef double one_a = 1.0 - alpha_a
    cdef double one_r = 1.0 - alpha_r
    cdef double slope = 1.0 - 1.0 / ratio
    cdef double state = 0.0
    cdef double level, over, target
    cdef Py_ssize_t i

    cdef double[::1] yv = y
    cdef double[::1] gv = gr

    with nogil:
        for i in range(n):
            level = fabs(xv[i])
            if level < LEVEL_FLOOR:
                level = LEVEL_FLOOR
            over = 20.0 * log10(level) - threshold_db
            if over > 0.0:
                target = over * slope
            else:
                target = 0.0
            if target > state:
                state = alpha_a * state + one_a * target
            else:
                state = alpha_r * state + one_r * target
            gv[i] = state
            yv[i] = xv[i] * pow(10.0, -state / 20.0)

    return y, gr
