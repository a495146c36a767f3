"""Limited-memory BFGS buffer with a jitted two-loop recursion."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _two_loop(S, Y, rho, head, count, q, out):
    m = S.shape[0]
    n = q.shape[0]
    alpha = np.empty(m)
    for i in range(n):
        out[i] = q[i]
    idx = head
    for _ in range(count):
        idx = (idx - 1) % m
        a = 0.0
        for i in range(n):
            a += S[idx, i] * out[i]
        a *= rho[idx]
        alpha[idx] = a
        for i in range(n):
            out[i] -= a * Y[idx, i]
    # initial Hessian scaling from the newest pair
    newest = (head - 1) % m
    yy = 0.0
    for i in range(n):
        yy += Y[newest, i] * Y[newest, i]
    h0 = 1.0 / (rho[newest] * yy)
    for i in range(n):
        out[i] *= h0
    for _ in range(count):
        b = 0.0
        for i in range(n):
            b += Y[idx, i] * out[i]
        b *= rho[idx]
        a = alpha[idx] - b
        for i in range(n):
            out[i] += a * S[idx, i]
        idx = (idx + 1) % m


class LBFGSMemory:
    """Ring buffer of curvature pairs ``(s, y)``; pairs failing the cautious test are skipped."""

    def __init__(self, n: int, memory: int = 10, cautious_eps: float = 1e-12):
        self.S = np.zeros((memory, n))
        self.Y = np.zeros((memory, n))
        self.rho = np.zeros(memory)
        self.head = 0
        self.count = 0
        self.cautious_eps = cautious_eps
        self._out = np.empty(n)

    def reset(self):
        self.head = 0
        self.count = 0

    def push(self, s, y) -> bool:
        sy = float(s.dot(y))
        ss = float(s.dot(s))
        if ss == 0.0 or sy <= self.cautious_eps * ss:
            return False
        self.S[self.head] = s
        self.Y[self.head] = y
        self.rho[self.head] = 1.0 / sy
        self.head = (self.head + 1) % self.S.shape[0]
        self.count = min(self.count + 1, self.S.shape[0])
        return True

    def apply(self, q, gamma: float) -> np.ndarray:
        """Approximate inverse-Jacobian product ``H q``; falls back to ``gamma * q``."""
        if self.count == 0:
            return gamma * q
        out = self._out
        _two_loop(self.S, self.Y, self.rho, self.head, self.count, q, out)
        return out.copy()
