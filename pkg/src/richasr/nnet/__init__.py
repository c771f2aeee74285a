"""Numerical kernels: deterministic RNG, parameter store, layers, grad checks."""

from .gradcheck import finite_diff_check
from .layers import (BiLstm, Embedding, Linear, Lstm, log_sigmoid, log_softmax,
                     logsumexp, sigmoid, softmax)
from .params import Param, ParamStore
from .rng import Rng

__all__ = [
    "BiLstm", "Embedding", "Linear", "Lstm", "Param", "ParamStore", "Rng",
    "finite_diff_check", "log_sigmoid", "log_softmax", "logsumexp", "sigmoid",
    "softmax",
]
