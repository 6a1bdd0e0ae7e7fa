"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Values are float64 numpy arrays. A Tensor is immutable after construction
except for gradient accumulation during backward(). Broadcasting in binary
elementwise ops is restricted to the leading-axis rule: operands must have
equal shapes, or the smaller operand's shape must equal a trailing suffix of
the larger's (it is then replicated over the leading axes). Anything richer
must be written as an explicit reshape.
"""

from __future__ import annotations

import builtins
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.values) if self.requires_grad else None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def item(self):
        return float(self.values.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; scalars and ndarrays are wrapped as constants.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Reverse-mode pass from a scalar output.

        Populates .grad of every requires_grad leaf reachable from this node;
        tensors outside the graph are untouched.
        """
        if self.values.size != 1:
            raise ShapeError(f"backward() requires a scalar output, got shape {self.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                topo.append(node)
                continue
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.values)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and node.grad is not None:
                node.grad += g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] += pg
                else:
                    grads[id(parent)] = pg


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _needs_graph(*ts):
    return builtins.any(t.requires_grad or t._parents for t in ts)


def _broadcast_check(a, b):
    """Leading-axis rule: equal shapes, or one shape a trailing suffix of the other."""
    if a.shape == b.shape:
        return
    small, big = (a, b) if a.ndim <= b.ndim else (b, a)
    if small.ndim == 0:
        return
    if big.shape[big.ndim - small.ndim:] == small.shape:
        return
    raise ShapeError(f"shapes {a.shape} and {b.shape} are not leading-axis broadcastable")


def _unbroadcast(g, shape):
    """Sum gradient over the leading axes introduced by broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g.reshape(shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out_vals = a.values + b.values
    if not _needs_graph(a, b):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=a.requires_grad or b.requires_grad,
        _parents=(a, b),
        _backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out_vals = a.values - b.values
    if not _needs_graph(a, b):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=a.requires_grad or b.requires_grad,
        _parents=(a, b),
        _backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out_vals = a.values * b.values
    if not _needs_graph(a, b):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=a.requires_grad or b.requires_grad,
        _parents=(a, b),
        _backward=lambda g: (
            _unbroadcast(g * b.values, a.shape),
            _unbroadcast(g * a.values, b.shape),
        ),
    )


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} vs {b.shape}")
    out_vals = a.values @ b.values
    if not _needs_graph(a, b):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=a.requires_grad or b.requires_grad,
        _parents=(a, b),
        _backward=lambda g: (g @ b.values.T, a.values.T @ g),
    )


def relu(x):
    x = _as_tensor(x)
    out_vals = np.maximum(x.values, 0.0)
    if not _needs_graph(x):
        return Tensor(out_vals)
    mask = x.values > 0.0
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g * mask,),
    )


def mean(x):
    """Mean over all elements, returning a scalar tensor."""
    x = _as_tensor(x)
    n = x.values.size
    out_vals = np.asarray(x.values.mean())
    if not _needs_graph(x):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (np.broadcast_to(g / n, x.shape).copy(),),
    )


def sum_over_axis(x, axis):
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    out_vals = x.values.sum(axis=axis)
    if not _needs_graph(x):
        return Tensor(out_vals)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return Tensor(out_vals, requires_grad=x.requires_grad, _parents=(x,), _backward=backward)


def log(x):
    x = _as_tensor(x)
    if np.any(x.values <= 0.0):
        raise DomainError("log of non-positive input; clamp before taking log")
    out_vals = np.log(x.values)
    if not _needs_graph(x):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g / x.values,),
    )


def abs(x):  # noqa: A001 - deliberate, mirrors numpy/torch naming
    x = _as_tensor(x)
    out_vals = np.abs(x.values)
    if not _needs_graph(x):
        return Tensor(out_vals)
    sign = np.sign(x.values)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g * sign,),
    )


def clamp(x, lo, hi):
    """Clip values to [lo, hi]; gradient passes only strictly inside the range."""
    x = _as_tensor(x)
    out_vals = np.clip(x.values, lo, hi)
    if not _needs_graph(x):
        return Tensor(out_vals)
    mask = (x.values > lo) & (x.values < hi)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g * mask,),
    )


def softmax_over_axis(x, axis):
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_vals = e / e.sum(axis=axis, keepdims=True)
    if not _needs_graph(x):
        return Tensor(out_vals)

    def backward(g):
        dot = (g * out_vals).sum(axis=axis, keepdims=True)
        return (out_vals * (g - dot),)

    return Tensor(out_vals, requires_grad=x.requires_grad, _parents=(x,), _backward=backward)


_NORM_FLOOR = 1e-8


def l2_normalize_rows(x):
    """Normalize each row of a 2-d tensor to unit L2 norm.

    Rows with norm < 1e-8 pass through unchanged and take an identity
    gradient (the norm is not differentiated there).
    """
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"l2_normalize_rows expects a 2-d tensor, got {x.shape}")
    norms = np.linalg.norm(x.values, axis=1, keepdims=True)
    safe = norms >= _NORM_FLOOR
    denom = np.where(safe, norms, 1.0)
    out_vals = x.values / denom
    if not _needs_graph(x):
        return Tensor(out_vals)

    def backward(g):
        dot = (g * out_vals).sum(axis=1, keepdims=True)
        gx = (g - out_vals * dot) / denom
        return (np.where(safe, gx, g),)

    return Tensor(out_vals, requires_grad=x.requires_grad, _parents=(x,), _backward=backward)


def reshape(x, shape):
    x = _as_tensor(x)
    shape = tuple(shape)
    out_vals = x.values.reshape(shape)
    if not _needs_graph(x):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g.reshape(x.shape),),
    )


def transpose(x):
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a 2-d tensor, got {x.shape}")
    out_vals = x.values.T.copy()
    if not _needs_graph(x):
        return Tensor(out_vals)
    return Tensor(
        out_vals,
        requires_grad=x.requires_grad,
        _parents=(x,),
        _backward=lambda g: (g.T.copy(),),
    )


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out_vals = np.concatenate([t.values for t in tensors], axis=axis)
    if not _needs_graph(*tensors):
        return Tensor(out_vals)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return Tensor(
        out_vals,
        requires_grad=builtins.any(t.requires_grad for t in tensors),
        _parents=tuple(tensors),
        _backward=backward,
    )


# ---------------------------------------------------------------------------
# Parameters and optimizers
# ---------------------------------------------------------------------------


class ParameterStore:
    """Named parameter registry with per-parameter optimizer state.

    Iteration order is deterministic (sorted by name). Optimizer state is
    shared by subset views so a parameter keeps its momentum/Adam moments
    across training phases.
    """

    def __init__(self, _params=None, _opt_state=None):
        self._params = {} if _params is None else _params
        self._opt_state = {} if _opt_state is None else _opt_state

    def register(self, name, values, requires_grad=True):
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(values, requires_grad=requires_grad)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def zero_grads(self):
        for _, p in self.items():
            if p.grad is not None:
                p.grad[...] = 0.0

    def set_trainable(self, trainable, prefix=""):
        """Toggle requires_grad (and grad buffers) for parameters under a prefix."""
        for name in self.names():
            if not name.startswith(prefix):
                continue
            p = self._params[name]
            p.requires_grad = bool(trainable)
            p.grad = np.zeros_like(p.values) if trainable else None

    def subset(self, prefixes):
        """View over parameters whose names start with any prefix; state is shared."""
        if isinstance(prefixes, str):
            prefixes = (prefixes,)
        sel = {
            n: p
            for n, p in self._params.items()
            if builtins.any(n.startswith(pre) for pre in prefixes)
        }
        return ParameterStore(_params=sel, _opt_state=self._opt_state)

    def state_arrays(self):
        """Parameter values in name order, for serialization."""
        return [(name, self._params[name].values) for name in self.names()]


def sgd_step(store, lr, momentum=0.0):
    """In-place SGD update over every parameter in the store; zeroes gradients."""
    for name, p in store.items():
        if p.grad is None:
            raise ValueError(f"parameter {name} has no gradient buffer")
        state = store._opt_state.setdefault(name, {})
        if momentum != 0.0:
            buf = state.get("momentum")
            if buf is None:
                buf = np.zeros_like(p.values)
            buf = momentum * buf + p.grad
            state["momentum"] = buf
            p.values -= lr * buf
        else:
            p.values -= lr * p.grad
    store.zero_grads()


def adam_step(store, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update with bias correction; zeroes gradients."""
    for name, p in store.items():
        if p.grad is None:
            raise ValueError(f"parameter {name} has no gradient buffer")
        state = store._opt_state.setdefault(name, {})
        t = state.get("t", 0) + 1
        m = state.get("m")
        v = state.get("v")
        if m is None:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = beta1 * m + (1.0 - beta1) * p.grad
        v = beta2 * v + (1.0 - beta2) * p.grad * p.grad
        state.update(t=t, m=m, v=v)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    store.zero_grads()


def glorot_uniform(rng, shape, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckResult:
    max_rel_error: float
    excluded: list = field(default_factory=list)
    checked: int = 0


def grad_check_detailed(fn, x, eps=1e-4, kink_tol=0.05):
    """Compare analytic gradients of a scalar function against central differences.

    Coordinates where the forward and backward one-sided differences disagree
    by more than kink_tol (relative) are flagged as non-checkable (kinks) and
    excluded from the reported maximum. Relative error uses the denominator
    max(|analytic|, |numeric|, 1), i.e. it degrades to absolute error for
    small gradients.
    """
    x = _as_tensor(x)
    probe = Tensor(x.values.copy(), requires_grad=True)
    out = fn(probe)
    if not isinstance(out, Tensor) or out.values.size != 1:
        raise ShapeError("grad_check requires a scalar-valued function")
    out.backward()
    analytic = probe.grad.reshape(-1).copy()

    base = x.values.copy()
    flat = base.reshape(-1)
    f0 = float(fn(Tensor(base)).values)
    max_err = 0.0
    excluded = []
    checked = 0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(fn(Tensor(base)).values)
        flat[i] = orig - eps
        f_minus = float(fn(Tensor(base)).values)
        flat[i] = orig
        d_fwd = (f_plus - f0) / eps
        d_bwd = (f0 - f_minus) / eps
        scale = max(1.0, np.abs(d_fwd), np.abs(d_bwd))
        if np.abs(d_fwd - d_bwd) > kink_tol * scale:
            excluded.append(i)
            continue
        central = (f_plus - f_minus) / (2.0 * eps)
        denom = max(np.abs(analytic[i]), np.abs(central), 1.0)
        err = np.abs(analytic[i] - central) / denom
        max_err = max(max_err, err)
        checked += 1
    return GradCheckResult(max_rel_error=float(max_err), excluded=excluded, checked=checked)


def grad_check(fn, x, eps=1e-4):
    """Worst relative error between analytic and central-difference gradients."""
    return grad_check_detailed(fn, x, eps=eps).max_rel_error
