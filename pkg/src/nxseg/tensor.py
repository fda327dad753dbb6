"""Minimal dense-matrix reverse-mode autodiff, just enough for this package.

Design constraints, on purpose:

* float64 everywhere — gradient checks stay tight and the NMF descent
  comparisons are meaningful at 1e-12.
* no general broadcasting: binary elementwise ops accept equal shapes or a
  Python scalar, nothing else.  Per-channel biases are expressed as an
  explicit outer product with a ones row (see segnet.with_bias).
* relu subgradient at exactly 0 is 0; log is floored at 1e-12 and the
  gradient is 0 in the floored region.

Every operation records its parents and a closure computing each parent's
gradient contribution; ``backward()`` replays them in reverse topological
order.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError
from . import kernels

LOG_FLOOR = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fns")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fns: tuple = ()

    # -- construction of graph nodes -------------------------------------

    @staticmethod
    def _result(data, parents, grad_fns) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        if out.requires_grad:
            out._parents = tuple(parents)
            out._grad_fns = tuple(grad_fns)
        else:
            out._parents = ()
            out._grad_fns = ()
        return out

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- elementwise ------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Tensor):
            if other.data.shape != self.data.shape and other.data.shape != ():
                raise ShapeError(
                    f"elementwise operands must match: {self.data.shape} vs "
                    f"{other.data.shape}")
            return other
        return Tensor(np.float64(other))

    def __add__(self, other):
        o = self._coerce(other)
        scalar = o.data.shape == () and self.data.shape != ()
        return Tensor._result(
            self.data + o.data, (self, o),
            (lambda g: g, (lambda g: np.sum(g)) if scalar else (lambda g: g)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        scalar = o.data.shape == () and self.data.shape != ()
        return Tensor._result(
            self.data - o.data, (self, o),
            (lambda g: g,
             (lambda g: -np.sum(g)) if scalar else (lambda g: -g)))

    def __rsub__(self, other):
        o = self._coerce(other)
        scalar = o.data.shape == () and self.data.shape != ()
        return Tensor._result(
            o.data - self.data, (self, o),
            (lambda g: -g,
             (lambda g: np.sum(g)) if scalar else (lambda g: g)))

    def __mul__(self, other):
        o = self._coerce(other)
        scalar = o.data.shape == () and self.data.shape != ()
        return Tensor._result(
            self.data * o.data, (self, o),
            (lambda g: g * o.data,
             (lambda g: np.sum(g * self.data)) if scalar
             else (lambda g: g * self.data)))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __abs__(self):
        sign = np.sign(self.data)
        return Tensor._result(np.abs(self.data), (self,),
                              (lambda g: g * sign,))

    # -- linear algebra ----------------------------------------------------

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            raise TypeError("matmul expects a Tensor operand")
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(
                f"matmul: incompatible shapes {a.shape} x {b.shape}")
        return Tensor._result(
            a @ b, (self, other),
            (lambda g: g @ b.T, lambda g: a.T @ g))

    @property
    def T(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ShapeError(f"transpose needs a matrix, got {self.data.shape}")
        return Tensor._result(self.data.T.copy(), (self,), (lambda g: g.T,))

    # -- reductions ---------------------------------------------------------

    def sum(self) -> "Tensor":
        shape = self.data.shape
        return Tensor._result(np.sum(self.data), (self,),
                              (lambda g: np.broadcast_to(g, shape).copy(),))

    def mean(self) -> "Tensor":
        n = self.data.size
        shape = self.data.shape
        return Tensor._result(
            np.mean(self.data), (self,),
            (lambda g: np.broadcast_to(g / n, shape).copy(),))

    # -- backward ------------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ShapeError("backward() starts from a scalar loss, got shape "
                             f"{self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            g = node.grad
            for parent, fn in zip(node._parents, node._grad_fns):
                if not parent.requires_grad:
                    continue
                contrib = fn(g)
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad = parent.grad + contrib


# ---------------------------------------------------------------- unary ----

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._result(np.where(mask, x.data, 0.0), (x,),
                          (lambda g: g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor._result(s, (x,), (lambda g: g * s * (1.0 - s),))


def log(x: Tensor) -> Tensor:
    floored = np.maximum(x.data, LOG_FLOOR)
    inside = x.data >= LOG_FLOOR
    return Tensor._result(np.log(floored), (x,),
                          (lambda g: g * inside / floored,))


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    return Tensor._result(np.clip(x.data, lo, hi), (x,),
                          (lambda g: g * inside,))


def conv1d(x: Tensor, kernel: Tensor, dilation: int = 1) -> Tensor:
    """Dilated same-padding cross-correlation of x (cin, T) with kernel
    (cout, cin, L).  L must be odd so the output stays frame-aligned."""
    if x.data.ndim != 2 or kernel.data.ndim != 3:
        raise ShapeError(f"conv1d expects (cin,T) and (cout,cin,L), got "
                         f"{x.data.shape} and {kernel.data.shape}")
    cout, cin, L = kernel.data.shape
    if L % 2 == 0:
        raise ConfigError(f"conv1d kernel length must be odd, got {L}")
    if dilation < 1:
        raise ConfigError(f"conv1d dilation must be >= 1, got {dilation}")
    if cin != x.data.shape[0]:
        raise ShapeError(f"conv1d channel mismatch: input has {x.data.shape[0]}"
                         f" channels, kernel expects {cin}")
    xd, kd = x.data, kernel.data
    out = kernels.conv1d_forward(xd, kd, dilation)
    return Tensor._result(
        out, (x, kernel),
        (lambda g: kernels.conv1d_backward_input(kd, g, dilation),
         lambda g: kernels.conv1d_backward_kernel(xd, g, L, dilation)))


# ----------------------------------------------------------------- adam ----

def adam_state(params: dict[str, np.ndarray]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: dict, lr: float = 1e-3, betas=(0.9, 0.999),
              eps: float = 1e-8) -> dict:
    """One Adam update with bias correction; mutates params and state."""
    b1, b2 = betas
    state["step"] += 1
    t = state["step"]
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    """Adam over a named set of Tensors (thin wrapper around adam_step)."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = adam_state({k: p.data for k, p in params.items()})

    def zero_grad(self):
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)

    def step(self):
        data = {k: p.data for k, p in self.params.items()}
        grads = {}
        for k, p in self.params.items():
            if p.grad is None:
                raise TrainingError(f"parameter {k!r} has no gradient")
            grads[k] = p.grad
        adam_step(data, grads, self.state, self.lr, self.betas, self.eps)
