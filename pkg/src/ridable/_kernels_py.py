"""Pure-numpy fallback with the same interface as the compiled ``_kernels``."""
import numpy as np

_LOG2 = np.log(2.0)
_CHUNK = 1 << 22


def _logcosh(s):
    a = np.abs(s)
    return a + np.log1p(np.exp(-2.0 * a)) - _LOG2


def logcosh_mean(Q, Yt, mu):
    Q = np.ascontiguousarray(Q, dtype=float)
    Yt = np.ascontiguousarray(Yt, dtype=float)
    if Yt.shape[1] != Q.shape[1]:
        raise ValueError("dimension mismatch between points and data")
    G, p = Q.shape[0], Yt.shape[0]
    out = np.empty(G)
    rows = max(1, _CHUNK // max(p, 1))
    for start in range(0, G, rows):
        S = (Q[start:start + rows] @ Yt.T) / mu
        out[start:start + rows] = mu * _logcosh(S).mean(axis=1)
    return out


def logcosh_derivatives(q, Yt, mu):
    q = np.asarray(q, dtype=float)
    Yt = np.ascontiguousarray(Yt, dtype=float)
    if Yt.shape[1] != q.shape[0]:
        raise ValueError("dimension mismatch between point and data")
    p = Yt.shape[0]
    s = (Yt @ q) / mu
    th = np.tanh(s)
    w = 1.0 - th * th
    value = mu * float(_logcosh(s).mean())
    grad = (Yt.T @ th) / p
    hess = (Yt.T * w) @ Yt / (mu * p)
    return value, grad, 0.5 * (hess + hess.T)
