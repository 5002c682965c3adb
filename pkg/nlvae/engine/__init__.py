"""Tensor core: dense tensors, reverse-mode autodiff, and network operations."""

from nlvae.engine.tensor import ComputationGraph, Function, Tensor, get_default_dtype, precision

__all__ = ["ComputationGraph", "Function", "Tensor", "get_default_dtype", "precision"]
