"""Dense tensors with reverse-mode differentiation.

Every differentiable operation goes through :func:`apply_primitive`, which runs
the primitive's forward kernel and, when any input requires gradients, records a
:class:`Node` for the backward pass.  Nodes carry a creation sequence number, so
sorting reachable nodes by that number is a valid topological order.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

_sequence = itertools.count()
_state = threading.local()

DEFAULT_DTYPE = np.float64


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording in the current thread."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """A dense array plus optional gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar routes through the primitive table.
    def __add__(self, other):
        return apply_primitive("add", [self, _as_tensor(other, self.dtype)])

    __radd__ = __add__

    def __mul__(self, other):
        return apply_primitive("elementwise-mul", [self, _as_tensor(other, self.dtype)])

    __rmul__ = __mul__


def _as_tensor(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


@dataclass(eq=False)
class Node:
    """One executed primitive: inputs and the context saved for backward."""

    primitive: "Primitive"
    inputs: tuple[Tensor, ...]
    ctx: Any
    attrs: dict
    seq: int = field(default_factory=lambda: next(_sequence))


class Primitive:
    """A forward kernel with its vector-Jacobian product.

    ``forward`` receives raw arrays and returns ``(output, ctx)``; ``backward``
    receives the saved ``ctx`` and the output gradient and returns one gradient
    per input (``None`` where no gradient flows).
    """

    kind: str = ""

    def check(self, shapes: Sequence[tuple[int, ...]], attrs: dict) -> None:
        pass

    def forward(self, xs: Sequence[np.ndarray], attrs: dict):
        raise NotImplementedError

    def backward(self, ctx, grad: np.ndarray, needs: Sequence[bool], attrs: dict):
        raise NotImplementedError


PRIMITIVES: dict[str, Primitive] = {}


def register(cls):
    PRIMITIVES[cls.kind] = cls()
    return cls


def apply_primitive(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Run primitive ``kind`` on ``inputs`` and record it when gradients are needed."""
    try:
        prim = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive kind {kind!r}; known: {sorted(PRIMITIVES)}") from None
    inputs = tuple(inputs)
    for t in inputs:
        if not isinstance(t, Tensor):
            raise TypeError(f"{kind}: inputs must be Tensor, got {type(t).__name__}")
    prim.check([t.shape for t in inputs], attrs)
    out_data, ctx = prim.forward([t.data for t in inputs], attrs)
    needs_grad = grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs_grad)
    if needs_grad:
        out._node = Node(prim, inputs, ctx, attrs)
    return out


class ComputationTape:
    """Nodes reachable from an output, in execution (topological) order."""

    def __init__(self, nodes: list[Node]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputationTape":
        seen: set[int] = set()
        nodes: list[Node] = []
        stack = [output]
        while stack:
            t = stack.pop()
            node = t._node
            if node is None or id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node.inputs)
        nodes.sort(key=lambda n: n.seq)
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def kinds(self) -> list[str]:
        return [n.primitive.kind for n in self.nodes]


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> ComputationTape:
    """Populate ``.grad`` on every leaf tensor that requires gradients.

    Gradients accumulate into existing ``.grad`` arrays.  Tensors listed in
    ``params`` that the loss does not depend on receive a zero gradient.
    """
    if loss.data.size != 1 or loss.ndim > 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = ComputationTape.from_output(loss)
    grads: dict[int, np.ndarray] = {_key(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss._node is None and loss.requires_grad:
        leaves[_key(loss)] = loss
    for node in reversed(tape.nodes):
        g = grads.pop(-(node.seq + 1), None)
        if g is None:
            continue
        needs = [t.requires_grad for t in node.inputs]
        in_grads = node.primitive.backward(node.ctx, g, needs, node.attrs)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            key = _key(t)
            if t._node is None:
                leaves[key] = t
            grads[key] = grads[key] + gi if key in grads else gi
    for key, t in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        g = np.asarray(g, dtype=t.data.dtype).reshape(t.shape)
        t.grad = g.copy() if t.grad is None else t.grad + g
    if params is not None:
        for p in params:
            if p.requires_grad and p.grad is None:
                p.grad = np.zeros_like(p.data)
    return tape


def _key(t: Tensor) -> int:
    # Non-leaf gradients are keyed by the producing node, leaves by identity.
    return -(t._node.seq + 1) if t._node is not None else id(t)
