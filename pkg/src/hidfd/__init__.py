"""Hybrid data-free distillation at desk scale, on a from-scratch autodiff core."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
