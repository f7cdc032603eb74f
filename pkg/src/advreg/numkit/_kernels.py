"""Fused elementwise kernels for the training hot path.

Each kernel has a numpy fallback with identical results; numba is used when
it can be imported.
"""

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _leaky_forward_np(z, alpha):
    out = z * alpha
    np.maximum(z, out, out=out)
    return out


def _leaky_backward_np(g, z, alpha):
    return g * np.where(z > 0, 1.0, alpha)


def _relu_backward_np(g, z):
    return g * (z > 0)


def _adam_np(p, g, v, s, alpha, b1, b2, c1, c2, eps):
    v *= b1
    v += (1.0 - b1) * g
    s *= b2
    s += (1.0 - b2) * g * g
    p -= alpha * (v / c1) / (np.sqrt(s / c2) + eps)


if numba is not None:

    @numba.njit(cache=True)
    def leaky_forward(z, alpha):
        out = np.empty_like(z)
        zf = z.reshape(-1)
        of = out.reshape(-1)
        for i in range(zf.size):
            v = zf[i]
            of[i] = v if v > 0 else alpha * v
        return out

    @numba.njit(cache=True)
    def leaky_backward(g, z, alpha):
        out = np.empty_like(g)
        gf = g.reshape(-1)
        zf = z.reshape(-1)
        of = out.reshape(-1)
        for i in range(gf.size):
            of[i] = gf[i] if zf[i] > 0 else alpha * gf[i]
        return out

    @numba.njit(cache=True)
    def relu_backward(g, z):
        out = np.empty_like(g)
        gf = g.reshape(-1)
        zf = z.reshape(-1)
        of = out.reshape(-1)
        for i in range(gf.size):
            of[i] = gf[i] if zf[i] > 0 else 0.0
        return out

    @numba.njit(cache=True)
    def _adam_nb(p, g, v, s, alpha, b1, b2, c1, c2, eps):
        pf = p.reshape(-1)
        gf = g.reshape(-1)
        vf = v.reshape(-1)
        sf = s.reshape(-1)
        for i in range(pf.size):
            gi = gf[i]
            vi = b1 * vf[i] + (1.0 - b1) * gi
            si = b2 * sf[i] + (1.0 - b2) * gi * gi
            vf[i] = vi
            sf[i] = si
            pf[i] -= alpha * (vi / c1) / (np.sqrt(si / c2) + eps)

    def adam_update(p, g, v, s, alpha, b1, b2, c1, c2, eps):
        if p.flags.c_contiguous and g.flags.c_contiguous:
            _adam_nb(p, g, v, s, alpha, b1, b2, c1, c2, eps)
        else:
            _adam_np(p, g, v, s, alpha, b1, b2, c1, c2, eps)

else:  # pragma: no cover
    leaky_forward = _leaky_forward_np
    leaky_backward = _leaky_backward_np
    relu_backward = _relu_backward_np
    adam_update = _adam_np


def contiguous(x):
    return np.ascontiguousarray(x, dtype=np.float64)
