"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions {a.shape[1]} and {b.shape[0]} differ")
    return a @ b


def log_softmax(a):
    shifted = a - a.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def row_sqdist(a, b):
    if a.shape != b.shape:
        raise ValueError("row_sqdist: operand shapes differ")
    d = a - b
    return np.einsum("ij,ij->i", d, d)
