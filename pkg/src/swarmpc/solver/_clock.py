"""Monotonic clock callable from nopython code (same clock as ``time.perf_counter`` on Linux)."""

import ctypes
import ctypes.util
import sys

from numba import njit

_CLOCK_MONOTONIC = 1 if sys.platform.startswith("linux") else 6

try:
    _libc = ctypes.CDLL(ctypes.util.find_library("c") or None)
    _clock_gettime = _libc.clock_gettime
    _clock_gettime.argtypes = [ctypes.c_int, ctypes.c_void_p]
    _clock_gettime.restype = ctypes.c_int
    HAVE_CLOCK = True
except (OSError, AttributeError):  # pragma: no cover
    HAVE_CLOCK = False

if HAVE_CLOCK:
    # ctypes pointers are dynamic globals, so this one cannot be cached on disk
    @njit(nogil=True)
    def monotonic(buf):
        _clock_gettime(_CLOCK_MONOTONIC, buf.ctypes.data)
        return buf[0] + 1e-9 * buf[1]
else:  # pragma: no cover
    @njit(nogil=True)
    def monotonic(buf):
        return 0.0
