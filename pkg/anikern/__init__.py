"""Numerical toolkit for positive-homogeneous operators and their heat kernels."""

__all__ = [
    "aniso_core",
    "estimator",
    "kernel_cc",
    "legendre",
    "operator_vc",
]

__version__ = "0.1.0"
