"""Parameter containers and the basic trainable layers."""

from __future__ import annotations

import zlib
from collections import OrderedDict
from typing import Iterator

import numpy as np

from . import ops
from .core import Tensor


def param_rng(seed: int, name: str) -> np.random.Generator:
    """RNG stream keyed by (seed, parameter name).

    Keying by name rather than by creation order means two models that share a
    parameter name get identical initial values for it, whatever else they hold.
    """
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


class Module:
    """Minimal module tree: parameters, buffers, children and a train flag."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, key, value):
        if isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def add_param(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        object.__setattr__(self, name, t)
        return t

    def add_buffer(self, name: str, data: np.ndarray) -> np.ndarray:
        self._buffers[name] = data
        object.__setattr__(self, name, data)
        return data

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((n, p.data) for n, p in self.named_parameters())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state: dict, strict: bool = True) -> None:
        own_params = dict(self.named_parameters())
        own_buffers = dict(self.named_buffers())
        if strict:
            missing = (set(own_params) | set(own_buffers)) - set(state)
            extra = set(state) - set(own_params) - set(own_buffers)
            if missing or extra:
                raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, value in state.items():
            target = own_params[name].data if name in own_params else own_buffers.get(name)
            if target is None:
                continue
            if target.shape != value.shape:
                raise ValueError(f"{name}: shape {value.shape} != {target.shape}")
            target[...] = value

    def to_dtype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        for m in self.modules():
            for name, b in list(m._buffers.items()):
                m.add_buffer(name, b.astype(dtype))
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """``y = x W^T + b`` with He-normal (fan-in) weights and zero bias."""

    def __init__(self, in_features: int, out_features: int, seed: int, name: str, bias: bool = True, dtype=np.float64):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        rng = param_rng(seed, name + ".weight")
        w = rng.standard_normal((out_features, in_features)) * np.sqrt(2.0 / in_features)
        self.add_param("weight", w.astype(dtype))
        self.bias = self.add_param("bias", np.zeros(out_features, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        seed: int,
        name: str,
        stride: int = 1,
        padding: int = 0,
        bias: bool = False,
        dtype=np.float64,
    ):
        super().__init__()
        self.stride, self.padding = stride, padding
        fan_in = in_channels * kernel_size * kernel_size
        rng = param_rng(seed, name + ".weight")
        w = rng.standard_normal((out_channels, in_channels, kernel_size, kernel_size)) * np.sqrt(2.0 / fan_in)
        self.add_param("weight", w.astype(dtype))
        self.bias = self.add_param("bias", np.zeros(out_channels, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm(Module):
    """Batch statistics while training, running statistics (momentum 0.1) in eval."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float64):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.add_param("weight", np.ones(channels, dtype=dtype))
        self.add_param("bias", np.zeros(channels, dtype=dtype))
        self.add_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.add_buffer("running_var", np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(
            x,
            self.weight,
            self.bias,
            running_mean=self.running_mean,
            running_var=self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class MLP(Module):
    """Linear layers with ReLU between them; the last layer emits raw values."""

    def __init__(self, widths: list[int], seed: int, name: str, dtype=np.float64):
        super().__init__()
        self.layers = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            layer = Linear(a, b, seed, f"{name}.fc{i}", dtype=dtype)
            setattr(self, f"fc{i}", layer)
            self.layers.append(layer)

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x
