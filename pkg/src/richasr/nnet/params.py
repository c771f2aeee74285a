"""Named parameter tensors with paired gradient buffers and freeze flags."""

import fnmatch
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation
from .rng import Rng


@dataclass
class Param:
    values: np.ndarray
    grad: np.ndarray
    frozen: bool = False

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass
class ParamStore:
    """Ordered map of name -> Param; registration order is deterministic."""

    entries: dict[str, Param] = field(default_factory=dict)

    def add(self, name: str, values: np.ndarray, frozen: bool = False) -> Param:
        if name in self.entries:
            raise ContractViolation(f"parameter {name!r} already registered")
        values = np.ascontiguousarray(values, dtype=np.float64)
        p = Param(values=values, grad=np.zeros_like(values), frozen=frozen)
        self.entries[name] = p
        return p

    def glorot(self, name: str, shape: tuple, rng: Rng) -> Param:
        """uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
        fan_in, fan_out = shape[0], shape[-1]
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, rng.uniform(-a, a, shape))

    def zeros(self, name: str, shape: tuple) -> Param:
        return self.add(name, np.zeros(shape, dtype=np.float64))

    def __getitem__(self, name: str) -> Param:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def names(self, pattern: str = "*") -> list[str]:
        return [n for n in self.entries if fnmatch.fnmatchcase(n, pattern)]

    def zero_grads(self) -> None:
        for p in self.entries.values():
            p.grad[...] = 0.0

    def set_frozen(self, patterns) -> None:
        """Set each entry's frozen flag to whether any glob pattern matches."""
        pats = list(patterns)
        for name, p in self.entries.items():
            p.frozen = any(fnmatch.fnmatchcase(name, pat) for pat in pats)

    def sgd_step(self, lr: float) -> None:
        """values -= lr * grad on every non-frozen entry."""
        if lr <= 0:
            raise ContractViolation("learning rate must be positive")
        for p in self.entries.values():
            if not p.frozen:
                p.values -= lr * p.grad

    def snapshot(self, pattern: str = "*") -> dict[str, np.ndarray]:
        return {n: self.entries[n].values.copy() for n in self.names(pattern)}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, vals in snap.items():
            self.entries[name].values[...] = vals

    def checksum(self, pattern: str = "*") -> str:
        """sha256 over the matching entries' raw bytes, in name order."""
        h = hashlib.sha256()
        for name in self.names(pattern):
            h.update(name.encode())
            h.update(self.entries[name].values.tobytes())
        return h.hexdigest()

    def num_values(self, pattern: str = "*") -> int:
        return sum(self.entries[n].values.size for n in self.names(pattern))
