"""Dense float64 matrices with reverse-mode differentiation and Adam.

Every value is a 2-D row-major block of finite float64 entries. Operations
validate shapes, reject non-finite results, and remember their inputs so
that ``gradient`` can differentiate any scalar result with respect to
matrices registered as parameters (see ``Matrix.param``). The graph is
rebuilt on every forward pass; leaves are the only long-lived objects.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateInputError,
    NonFiniteError,
    ShapeError,
    UnknownParameterError,
)

Array = np.ndarray
_Vjp = Callable[[Array], Array]
_Edges = tuple[tuple["Matrix", _Vjp], ...]


def _validated(values: Array, op: str) -> Array:
    if values.ndim != 2:
        raise ShapeError(f"{op}: expected a 2-D value, got ndim={values.ndim}")
    if values.shape[0] < 1 or values.shape[1] < 1:
        raise ShapeError(f"{op}: shape {values.shape} has an empty dimension")
    if not np.isfinite(values).all():
        raise NonFiniteError(f"{op} produced non-finite entries")
    return values


class Matrix:
    """A rows x cols block of finite float64 values.

    1-D input is promoted to a single row. Results of the module-level
    operations carry edges back to their inputs for reverse-mode
    differentiation; plain constructed matrices are constants unless
    created through ``Matrix.param``.
    """

    __slots__ = ("data", "name", "is_param", "_edges")

    def __init__(self, values, *, name: str | None = None):
        arr = np.array(values, dtype=np.float64, order="C")
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.data = _validated(arr, "Matrix")
        self.name = name
        self.is_param = False
        self._edges: _Edges = ()

    @classmethod
    def param(cls, values, name: str | None = None) -> "Matrix":
        """Construct a matrix registered as a trainable parameter."""
        out = cls(values, name=name)
        out.is_param = True
        return out

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() requires a 1x1 matrix, got {self.shape}")
        return float(self.data[0, 0])

    def to_array(self) -> Array:
        return self.data.copy()

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Matrix{label} {self.rows}x{self.cols}>"

    # Arithmetic sugar; the module-level functions do the real work.
    def __add__(self, other):
        if isinstance(other, Matrix):
            return add(self, other)
        return add_scalar(self, float(other))

    def __sub__(self, other):
        if isinstance(other, Matrix):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __mul__(self, other):
        if isinstance(other, Matrix):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __truediv__(self, other):
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Matrix":
        return transpose(self)


def _node(values: Array, edges: _Edges, op: str) -> Matrix:
    out = Matrix.__new__(Matrix)
    out.data = _validated(np.ascontiguousarray(values, dtype=np.float64), op)
    out.name = None
    out.is_param = False
    out._edges = edges
    return out


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product; differentiable in both operands."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _node(
        ad @ bd,
        ((a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)),
        "matmul",
    )


def transpose(m: Matrix) -> Matrix:
    return _node(m.data.T, ((m, lambda g: g.T),), "transpose")


def add(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise sum; `b` may be a single row broadcast over the rows of `a`."""
    if a.shape == b.shape:
        return _node(a.data + b.data, ((a, lambda g: g), (b, lambda g: g)), "add")
    if b.shape == (1, a.cols):
        return _node(
            a.data + b.data,
            ((a, lambda g: g), (b, lambda g: g.sum(axis=0, keepdims=True))),
            "add",
        )
    raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")


def sub(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    return _node(a.data - b.data, ((a, lambda g: g), (b, lambda g: -g)), "sub")


def mul(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise (Hadamard) product of same-shape matrices."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _node(ad * bd, ((a, lambda g: g * bd), (b, lambda g: g * ad)), "mul")


def scale(m: Matrix, factor: float) -> Matrix:
    factor = float(factor)
    if not math.isfinite(factor):
        raise NonFiniteError("scale: factor is not finite")
    return _node(m.data * factor, ((m, lambda g: g * factor),), "scale")


def add_scalar(m: Matrix, offset: float) -> Matrix:
    offset = float(offset)
    if not math.isfinite(offset):
        raise NonFiniteError("add_scalar: offset is not finite")
    return _node(m.data + offset, ((m, lambda g: g),), "add_scalar")


def relu(m: Matrix) -> Matrix:
    mask = m.data > 0.0
    return _node(np.where(mask, m.data, 0.0), ((m, lambda g: g * mask),), "relu")


def exp(m: Matrix) -> Matrix:
    with np.errstate(over="ignore"):
        out = np.exp(m.data)
    result = _node(out, ((m, lambda g: g * out),), "exp")
    return result


def log(m: Matrix) -> Matrix:
    if (m.data <= 0.0).any():
        raise DegenerateInputError("log requires strictly positive entries")
    md = m.data
    return _node(np.log(md), ((m, lambda g: g / md),), "log")


def absval(m: Matrix) -> Matrix:
    # Subgradient 0 at the kink: np.sign(0) == 0.
    sgn = np.sign(m.data)
    return _node(np.abs(m.data), ((m, lambda g: g * sgn),), "absval")


def xlogx(m: Matrix) -> Matrix:
    """Elementwise x*log(x) with the 0*log(0) = 0 convention.

    The gradient at 0 is also taken as 0, which keeps backward passes
    finite when probabilities underflow to exactly zero.
    """
    x = m.data
    if (x < 0.0).any():
        raise DegenerateInputError("xlogx requires nonnegative entries")
    pos = x > 0.0
    out = np.zeros_like(x)
    out[pos] = x[pos] * np.log(x[pos])
    deriv = np.zeros_like(x)
    deriv[pos] = np.log(x[pos]) + 1.0
    return _node(out, ((m, lambda g: g * deriv),), "xlogx")


def total_sum(m: Matrix) -> Matrix:
    shape = m.shape
    return _node(
        np.array([[m.data.sum()]]),
        ((m, lambda g: np.full(shape, g[0, 0])),),
        "total_sum",
    )


def row_sums(m: Matrix) -> Matrix:
    """Sum over columns, one value per row (rows x 1)."""
    cols = m.cols
    return _node(
        m.data.sum(axis=1, keepdims=True),
        ((m, lambda g: np.repeat(g, cols, axis=1)),),
        "row_sums",
    )


def col_sums(m: Matrix) -> Matrix:
    """Sum over rows, one value per column (1 x cols)."""
    rows = m.rows
    return _node(
        m.data.sum(axis=0, keepdims=True),
        ((m, lambda g: np.repeat(g, rows, axis=0)),),
        "col_sums",
    )


def diagonal(m: Matrix) -> Matrix:
    """Main diagonal of a square matrix as an n x 1 column."""
    if m.rows != m.cols:
        raise ShapeError(f"diagonal requires a square matrix, got {m.shape}")
    n = m.rows

    def vjp(g: Array) -> Array:
        buf = np.zeros((n, n))
        buf[np.arange(n), np.arange(n)] = g[:, 0]
        return buf

    return _node(m.data.diagonal().reshape(n, 1).copy(), ((m, vjp),), "diagonal")


def take_rows(m: Matrix, indices) -> Matrix:
    """Select rows by position, keeping the given order."""
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ShapeError("take_rows: empty selection")
    if idx.min() < 0 or idx.max() >= m.rows:
        raise ShapeError(f"take_rows: index out of range for {m.rows} rows")
    shape = m.shape

    def vjp(g: Array) -> Array:
        buf = np.zeros(shape)
        np.add.at(buf, idx, g)
        return buf

    return _node(m.data[idx], ((m, vjp),), "take_rows")


def softmax_rows(m: Matrix) -> Matrix:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    z = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g: Array) -> Array:
        return (g - (g * s).sum(axis=1, keepdims=True)) * s

    return _node(s, ((m, vjp),), "softmax_rows")


def l2_normalize_rows(m: Matrix, eps: float = 1e-12) -> Matrix:
    """Scale each row to unit Euclidean norm; all-zero rows pass through.

    Rows whose norm is at most ``eps`` are divided by ``eps`` instead, which
    leaves exact zero rows unchanged and keeps the backward pass finite.
    """
    if not eps > 0.0:
        raise ConfigError("l2_normalize_rows: eps must be positive")
    x = m.data
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    denom = np.maximum(norm, eps)
    y = x / denom

    def vjp(g: Array) -> Array:
        coef = (x * g).sum(axis=1, keepdims=True) / denom**3
        coef = np.where(norm > eps, coef, 0.0)
        return g / denom - coef * x

    return _node(y, ((m, vjp),), "l2_normalize_rows")


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two nonzero vectors, clipped into [-1, 1]."""
    va = _as_vector(a)
    vb = _as_vector(b)
    if va.size != vb.size:
        raise ShapeError(f"cosine_similarity: lengths differ, {va.size} vs {vb.size}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine_similarity is undefined for zero vectors")
    return float(np.clip(float(va @ vb) / (na * nb), -1.0, 1.0))


def _as_vector(v) -> Array:
    if isinstance(v, Matrix):
        v = v.data
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ShapeError("cosine_similarity: empty vector")
    if not np.isfinite(arr).all():
        raise NonFiniteError("cosine_similarity: non-finite entries")
    return arr


def gradient(loss: Matrix, params: Sequence[Matrix]) -> dict[Matrix, Array]:
    """Gradient of a 1x1 scalar with respect to registered parameters.

    Parameters that do not influence the loss get exact zero gradients.
    Passing a matrix that was never registered via ``Matrix.param`` is an
    error: its gradient was never going to be tracked.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"gradient: loss must be 1x1, got {loss.shape}")
    for p in params:
        if not p.is_param:
            raise UnknownParameterError(
                f"matrix {p.name or '<unnamed>'} is not registered as a parameter"
            )

    order: list[Matrix] = []
    visited: set[int] = set()
    stack: list[tuple[Matrix, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node._edges:
            if id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, Array] = {id(loss): np.ones((1, 1))}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, vjp in node._edges:
            contrib = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib

    return {p: grads.get(id(p), np.zeros_like(p.data)) for p in params}


class Adam:
    """Adam update rule with bias correction.

    Moments are kept per parameter inside the optimizer; ``step`` applies
    one update in place. A parameter whose gradient stays zero from a fresh
    state is left exactly unchanged.
    """

    def __init__(
        self,
        params: Sequence[Matrix],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if not learning_rate > 0.0:
            raise ConfigError("Adam: learning_rate must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError("Adam: betas must lie in [0, 1)")
        if not eps > 0.0:
            raise ConfigError("Adam: eps must be positive")
        self.params = list(params)
        for p in self.params:
            if not p.is_param:
                raise UnknownParameterError(
                    f"matrix {p.name or '<unnamed>'} is not registered as a parameter"
                )
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Mapping[Matrix, Array]) -> None:
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for p, m, v in zip(self.params, self.first_moment, self.second_moment):
            if p not in grads:
                raise UnknownParameterError(
                    f"no gradient supplied for parameter {p.name or '<unnamed>'}"
                )
            g = np.asarray(grads[p], dtype=np.float64)
            if g.shape != p.data.shape:
                raise ShapeError(
                    f"Adam: gradient shape {g.shape} != parameter shape {p.data.shape}"
                )
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
