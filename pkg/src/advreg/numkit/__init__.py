"""Dense tensor math with reverse-mode differentiation, losses and optimizers."""

from .functional import ACTIVATIONS, activation, affine_forward, bce_loss, mse_loss
from .optim import OptimizerState, adam_step, rmsprop_step, sgd_momentum_step
from .tape import Op, Tape, Var, grad, input_gradient
from . import tape as ops

__all__ = [
    "ACTIVATIONS",
    "Op",
    "OptimizerState",
    "Tape",
    "Var",
    "activation",
    "adam_step",
    "affine_forward",
    "bce_loss",
    "grad",
    "input_gradient",
    "mse_loss",
    "ops",
    "rmsprop_step",
    "sgd_momentum_step",
]
