"""Minimal dense-tensor math with reverse-mode automatic differentiation.

Tensors wrap numpy arrays and record a backward rule per operation. The
default training precision is float32; gradient tests run the same graph
in float64. Every op output is checked for NaN/Inf.

Gradient semantics: ``backward()`` propagates through a per-call local
table and accumulates into ``.grad`` of leaf tensors only, so calling
backward twice doubles leaf gradients and intermediate results are never
polluted across calls.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import NumericError, ShapeError

LOG_EPS = 1e-12
ONE_MINUS_CAP = 1.0 - 1e-7

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording (inference / finite-difference probes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


def _check_finite(data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError("non-finite value produced by a tensor op")


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bwd", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, _check: bool = True):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float32)
        self.data = data
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._bwd = None
        self.requires_grad = requires_grad
        if _check:
            _check_finite(data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: float | np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        if seed is None:
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            if seed.shape != self.data.shape:
                seed = np.broadcast_to(seed, self.data.shape).copy()
        order = _topo_order(self)
        local: dict[int, np.ndarray] = {id(self): seed}
        for node in order:
            grad = local.pop(id(node), None)
            if grad is None:
                continue
            if node._bwd is None:
                if node.requires_grad:
                    node.grad = grad if node.grad is None else node.grad + grad
                continue
            for parent, pgrad in zip(node._parents, node._bwd(grad)):
                if pgrad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in local:
                    local[key] = local[key] + pgrad
                else:
                    local[key] = pgrad

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _topo_order(root: Tensor) -> list[Tensor]:
    """Reverse topological order via iterative post-order DFS."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order


class Parameter(Tensor):
    """A named trainable leaf with a persistent gradient accumulator."""

    __slots__ = ("name",)

    def __init__(self, name: str, data: np.ndarray):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


def _result(data: np.ndarray, parents: tuple[Tensor, ...], bwd) -> Tensor:
    _check_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out._parents = parents
        out._bwd = bwd
        out.requires_grad = True
    else:
        out._parents = ()
        out._bwd = None
        out.requires_grad = False
    return out


def _require_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


# ---------------------------------------------------------------------------
# core ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _require_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_shape(a, b, "mul")
    return _result(
        a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data)
    )


def add_n(tensors: list[Tensor]) -> Tensor:
    """Sum of same-shaped tensors (loss accumulation)."""
    if not tensors:
        raise ShapeError("add_n of an empty list")
    data = tensors[0].data
    for t in tensors[1:]:
        _require_shape(tensors[0], t, "add_n")
        data = data + t.data
    n = len(tensors)
    return _result(data, tuple(tensors), lambda g: (g,) * n)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    return _result(a.data * c, (a,), lambda g: (g * c,))


def smul(vec: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a 0-d scalar tensor."""
    if s.data.shape != ():
        raise ShapeError(f"smul: scalar operand has shape {s.data.shape}")
    return _result(
        vec.data * s.data,
        (vec, s),
        lambda g: (g * s.data, np.sum(g * vec.data)),
    )


def one_minus(a: Tensor) -> Tensor:
    return _result(1.0 - a.data, (a,), lambda g: (-g,))


def matvec(w: Tensor, x: Tensor) -> Tensor:
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ShapeError(
            f"matvec: shapes {w.data.shape} and {x.data.shape} incompatible"
        )
    return _result(
        w.data @ x.data,
        (w, x),
        lambda g: (np.outer(g, x.data), w.data.T @ g),
    )


def vecmat(v: Tensor, m: Tensor) -> Tensor:
    """Row-vector times matrix: (l,) @ (l, d) -> (d,)."""
    if v.data.ndim != 1 or m.data.ndim != 2 or v.data.shape[0] != m.data.shape[0]:
        raise ShapeError(
            f"vecmat: shapes {v.data.shape} and {m.data.shape} incompatible"
        )
    return _result(
        v.data @ m.data,
        (v, m),
        lambda g: (m.data @ g, np.outer(v.data, g)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: shapes {a.data.shape} and {b.data.shape} incompatible"
        )
    return _result(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise ShapeError(f"dot: shapes {a.data.shape} and {b.data.shape}")
    _require_shape(a, b, "dot")
    return _result(
        np.asarray(a.data @ b.data),
        (a, b),
        lambda g: (g * b.data, g * a.data),
    )


def concat(parts: list[Tensor]) -> Tensor:
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, offsets))

    return _result(np.concatenate([p.data for p in parts]), tuple(parts), bwd)


def slice1d(x: Tensor, start: int, stop: int) -> Tensor:
    def bwd(g):
        out = np.zeros_like(x.data)
        out[start:stop] = g
        return (out,)

    return _result(x.data[start:stop].copy(), (x,), bwd)


def row(m: Tensor, k: int) -> Tensor:
    """Row k of a matrix; also serves as the embedding gather."""
    if not 0 <= k < m.data.shape[0]:
        raise ShapeError(f"row index {k} out of range for shape {m.data.shape}")

    def bwd(g):
        out = np.zeros_like(m.data)
        out[k] = g
        return (out,)

    return _result(m.data[k].copy(), (m,), bwd)


def stack_rows(parts: list[Tensor]) -> Tensor:
    def bwd(g):
        return tuple(g[i] for i in range(len(parts)))

    return _result(np.stack([p.data for p in parts]), tuple(parts), bwd)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    shifted = x.data - np.max(x.data, axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=-1, keepdims=True)

    def bwd(g):
        return (y * (g - np.sum(g * y, axis=-1, keepdims=True)),)

    return _result(y, (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    return _result(
        np.asarray(np.sum(x.data)),
        (x,),
        lambda g: (np.full_like(x.data, 1.0) * g,),
    )


def recip(x: Tensor) -> Tensor:
    """1/x for a 0-d scalar tensor; zero input raises."""
    if float(x.data) == 0.0:
        raise NumericError("reciprocal of zero (attention underflow)")
    y = 1.0 / x.data
    return _result(np.asarray(y), (x,), lambda g: (-g * y * y,))


def pad_to(x: Tensor, size: int) -> Tensor:
    n = x.data.shape[0]
    if size < n:
        raise ShapeError(f"pad_to: target {size} smaller than input {n}")
    out = np.zeros(size, dtype=x.data.dtype)
    out[:n] = x.data
    return _result(out, (x,), lambda g: (g[:n],))


def scatter_add(src: Tensor, index: np.ndarray, size: int) -> Tensor:
    """out[index[k]] += src[k]; index is a fixed integer array."""
    if src.data.shape[0] != len(index):
        raise ShapeError(
            f"scatter_add: {src.data.shape[0]} values vs {len(index)} indices"
        )
    out = np.zeros(size, dtype=src.data.dtype)
    np.add.at(out, index, src.data)
    return _result(out, (src,), lambda g: (g[index],))


def nll(dist: Tensor, target_id: int) -> Tensor:
    """Negative log-likelihood -log(p[target] + eps) of a probability vector."""
    p = dist.data
    if not 0 <= target_id < p.shape[0]:
        raise ShapeError(
            f"nll: target {target_id} out of range for {p.shape[0]} classes"
        )
    if abs(float(np.sum(p)) - 1.0) > 1e-5:
        raise NumericError("nll: distribution does not sum to 1 within 1e-5")
    value = -np.log(p[target_id] + LOG_EPS)

    def bwd(g):
        out = np.zeros_like(p)
        out[target_id] = -g / (p[target_id] + LOG_EPS)
        return (out,)

    return _result(np.asarray(value, dtype=p.dtype), (dist,), bwd)


def complement_nll(dist: Tensor, target_id: int) -> Tensor:
    """-log(1 - p[target] + eps), with p clamped to <= 1 - 1e-7."""
    p = dist.data
    if not 0 <= target_id < p.shape[0]:
        raise ShapeError(
            f"complement_nll: target {target_id} out of range for {p.shape[0]}"
        )
    clamped = min(float(p[target_id]), ONE_MINUS_CAP)
    value = -np.log(1.0 - clamped + LOG_EPS)

    def bwd(g):
        out = np.zeros_like(p)
        if float(p[target_id]) < ONE_MINUS_CAP:
            out[target_id] = g / (1.0 - clamped + LOG_EPS)
        return (out,)

    return _result(np.asarray(value, dtype=p.dtype), (dist,), bwd)


def zeros(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def finite_difference_check(
    fn, inputs: list[Tensor], tolerance: float = 1e-4, step: float = 1e-5
) -> float:
    """Worst relative error between backward gradients and central
    finite differences of the scalar ``fn(*inputs)``, over every entry of
    every input. Inputs must be float64.

    The numeric side re-evaluates the forward function only, so it stays
    independent of the backward rules it is checking. ``tolerance`` is the
    caller's pass bar; it is returned untouched for assertion convenience.
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise NumericError("finite_difference_check requires float64 inputs")
        t.zero_grad()
        t.requires_grad = True
    out = fn(*inputs)
    out.backward()
    worst = 0.0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        grad_flat = analytic.reshape(-1)
        for k in range(flat.shape[0]):
            orig = flat[k]
            with no_grad():
                flat[k] = orig + step
                hi = float(fn(*inputs).data)
                flat[k] = orig - step
                lo = float(fn(*inputs).data)
            flat[k] = orig
            numeric = (hi - lo) / (2.0 * step)
            a = grad_flat[k]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            if err > worst:
                worst = err
    return worst
