"""Parameter store and the GRU cell shared by encoder and decoders.

Gate convention, also documented in the README:

    z = sigmoid(Wz x + Uz h + bz)           update gate
    r = sigmoid(Wr x + Ur h + br)           reset gate
    c = tanh(Wc x + Uc (r * h) + bc)        candidate state
    h' = (1 - z) * h + z * c

Weights are drawn uniformly from [-0.1, 0.1]; biases start at zero.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigError

INIT_BOUND = 0.1


class ParamSet:
    """Flat, insertion-ordered registry of named parameters."""

    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        self.rng = rng
        self.dtype = dtype
        self._params: dict[str, Parameter] = {}

    def create(self, name: str, shape, init: str = "uniform") -> Parameter:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name: {name}")
        if init == "uniform":
            data = self.rng.uniform(-INIT_BOUND, INIT_BOUND, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        else:
            raise ConfigError(f"unknown initializer: {init}")
        param = Parameter(name, np.asarray(data, dtype=self.dtype))
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) ^ set(arrays)
        if missing:
            raise ConfigError(f"parameter name mismatch: {sorted(missing)}")
        for name, p in self._params.items():
            arr = np.asarray(arrays[name], dtype=self.dtype)
            if arr.shape != p.data.shape:
                raise ConfigError(
                    f"parameter {name}: shape {arr.shape} != {p.data.shape}"
                )
            p.data = arr
            p.grad = None


class GRUCell:
    """Single GRU step over 1-D input and state vectors."""

    def __init__(self, params: ParamSet, prefix: str, input_size: int,
                 hidden_size: int):
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        # input-side weights for (z, r, c) stacked; gate/candidate recurrences
        self.w_in = params.create(f"{prefix}.w_in", (3 * h, input_size))
        self.bias = params.create(f"{prefix}.bias", (3 * h,), init="zeros")
        self.u_gates = params.create(f"{prefix}.u_gates", (2 * h, h))
        self.u_cand = params.create(f"{prefix}.u_cand", (h, h))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        hs = self.hidden_size
        xw = ad.add(ad.matvec(self.w_in, x), self.bias)
        hg = ad.matvec(self.u_gates, h)
        z = ad.sigmoid(ad.add(ad.slice1d(xw, 0, hs), ad.slice1d(hg, 0, hs)))
        r = ad.sigmoid(
            ad.add(ad.slice1d(xw, hs, 2 * hs), ad.slice1d(hg, hs, 2 * hs))
        )
        cand = ad.tanh(
            ad.add(
                ad.slice1d(xw, 2 * hs, 3 * hs),
                ad.matvec(self.u_cand, ad.mul(r, h)),
            )
        )
        return ad.add(ad.mul(ad.one_minus(z), h), ad.mul(z, cand))
