"""Adversarial regression laboratory: conditional GANs as conditional density estimators."""

__version__ = "0.1.0"
