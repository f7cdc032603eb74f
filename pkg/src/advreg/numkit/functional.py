"""Layer primitives and losses built on the tape operations."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, DimensionError, DivergedError
from . import tape as T

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "identity", "softmax")

# y_hat is clamped into [BCE_EPS, 1 - BCE_EPS] before taking logs
BCE_EPS = 1e-12


def _shape(x):
    return np.shape(x.value if isinstance(x, T.Var) else x)


def _finite(x, what: str):
    """Raise :class:`DivergedError` unless every entry of ``x`` is finite."""
    v = x.value if isinstance(x, T.Var) else x
    # one reduction instead of an elementwise mask: any NaN or Inf poisons the sum
    if not np.isfinite(np.sum(v)):
        raise DivergedError(f"{what} produced a non-finite value")
    return x


def affine_forward(a_prev, W, b):
    """Dense layer ``a_prev @ W + b`` for ``a_prev`` of shape (batch, n_in)."""
    sa, sw, sb = _shape(a_prev), _shape(W), _shape(b)
    if len(sa) != 2 or len(sw) != 2 or sa[1] != sw[0] or sb != (sw[1],):
        raise DimensionError(f"affine shapes do not conform: {sa}, {sw}, {sb}")
    return _finite(T.affine(a_prev, W, b), "affine layer")


def activation(z, kind: str, alpha: float = 0.2):
    """Apply the activation ``kind``; ``alpha`` is the leaky-relu slope."""
    if kind == "relu":
        return T.relu(z)
    if kind == "leaky_relu":
        if not 0.0 < alpha < 1.0:
            raise ConfigurationError(f"leaky_relu slope must lie in (0, 1), got {alpha}")
        return T.leaky_relu(z, alpha)
    if kind == "sigmoid":
        return T.sigmoid(z)
    if kind == "identity":
        return z
    if kind == "softmax":
        return _finite(T.softmax(z), "softmax")
    raise ConfigurationError(f"unknown activation {kind!r}")


def bce_loss(y_hat, y):
    """Mean binary cross-entropy, with ``y_hat`` clamped away from 0 and 1."""
    if _shape(y_hat) != np.shape(y):
        raise DimensionError(f"bce shapes differ: {_shape(y_hat)} vs {np.shape(y)}")
    y = np.asarray(y, dtype=np.float64)
    p = T.clip(y_hat, BCE_EPS, 1.0 - BCE_EPS)
    ll = T.add(T.mul(y, T.log(p)), T.mul(1.0 - y, T.log(T.sub(1.0, p))))
    return _finite(T.neg(T.mean(ll)), "bce_loss")


def mse_loss(y_hat, y):
    """Mean of squared residuals."""
    if _shape(y_hat) != _shape(y):
        raise DimensionError(f"mse shapes differ: {_shape(y_hat)} vs {_shape(y)}")
    r = T.sub(y_hat, y)
    return _finite(T.mean(T.mul(r, r)), "mse_loss")
