"""Momentum, RMSprop and Adam updates applied in place to parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


@dataclass
class OptimizerState:
    """First/second moment averages and hyperparameters of one optimizer.

    ``V`` and ``S`` start empty and are filled with zeros shaped like the
    parameters on the first step.
    """

    alpha: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    epsilon: float = 1e-8
    t: int = 0
    V: list = field(default_factory=list)
    S: list = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def _ensure(self, params):
        if not self.V:
            self.V = [np.zeros_like(p) for p in params]
            self.S = [np.zeros_like(p) for p in params]


def sgd_momentum_step(state: OptimizerState, grads, params):
    """``V <- b1 V + (1 - b1) g``; ``theta <- theta - alpha V``."""
    state._ensure(params)
    state.t += 1
    b = state.beta1
    for p, g, v in zip(params, grads, state.V):
        v *= b
        v += (1.0 - b) * g
        p -= state.alpha * v
    return params


def rmsprop_step(state: OptimizerState, grads, params):
    """``S <- b2 S + (1 - b2) g^2``; ``theta <- theta - alpha g / (sqrt(S) + eps)``."""
    state._ensure(params)
    state.t += 1
    b = state.beta2
    for p, g, s in zip(params, grads, state.S):
        s *= b
        s += (1.0 - b) * g * g
        p -= state.alpha * g / (np.sqrt(s) + state.epsilon)
    return params


def adam_step(state: OptimizerState, grads, params):
    """Adam with bias correction; ``t`` is incremented before correcting."""
    state._ensure(params)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, v, s in zip(params, grads, state.V, state.S):
        K.adam_update(p, np.asarray(g, dtype=np.float64), v, s, state.alpha, b1, b2, c1, c2, state.epsilon)
    return params
