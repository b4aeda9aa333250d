# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop for inactivity-gap run splitting.

Input arrays must be sorted by (stream_id, timestamp). Emits a session
index per row; a new session starts whenever the stream changes or the
inter-flow gap reaches the threshold.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def split_runs(cnp.int64_t[::1] ts_ms, cnp.int64_t[::1] stream_id, cnp.int64_t gap_ms):
    cdef Py_ssize_t n = ts_ms.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out_v = out
    cdef Py_ssize_t i
    cdef cnp.int64_t sid = -1
    for i in range(n):
        if i == 0 or stream_id[i] != stream_id[i - 1] or ts_ms[i] - ts_ms[i - 1] >= gap_ms:
            sid += 1
        out_v[i] = sid
    return out
