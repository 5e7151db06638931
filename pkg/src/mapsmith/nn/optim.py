"""Named parameter store with the Adam update.

The store is the single mutable object in training: layers register
tensors at construction, the training loop calls ``zero_grad`` and
``adam_step``, and serialization walks the same name -> tensor map.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .tensor import Tensor


class ParamStore:
    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self.params:
            raise DataError(f"duplicate parameter name {name!r}")
        tensor = Tensor(np.asarray(array, dtype=np.float32), requires_grad=True)
        self.params[name] = tensor
        self._m[name] = np.zeros_like(tensor.data)
        self._v[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self):
        return list(self.params)

    def count(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def zero_grad(self):
        for tensor in self.params.values():
            tensor.grad = None

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        """Bias-corrected Adam over every parameter with a gradient."""
        self.step_count += 1
        t = self.step_count
        correct1 = 1.0 - beta1**t
        correct2 = 1.0 - beta2**t
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            g = tensor.grad
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            m_hat = m / correct1
            v_hat = v / correct2
            tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)

    def state_arrays(self) -> dict:
        return {name: tensor.data for name, tensor in self.params.items()}

    def load_arrays(self, arrays: dict):
        for name, tensor in self.params.items():
            if name not in arrays:
                raise DataError(f"model file is missing parameter {name!r}")
            incoming = np.asarray(arrays[name], dtype=np.float32)
            if incoming.shape != tensor.data.shape:
                raise DataError(
                    f"parameter {name!r} shape {incoming.shape} does not match "
                    f"expected {tensor.data.shape}"
                )
            tensor.data = incoming.copy()
        extra = set(arrays) - set(self.params)
        if extra:
            raise DataError(f"model file has unknown parameters: {sorted(extra)[:5]}")
