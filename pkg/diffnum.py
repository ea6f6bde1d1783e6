"""Dense/sparse float64 kernels with tape-based reverse-mode differentiation.

Every primitive is a method on :class:`Tape`. Forward values are computed
eagerly with numpy/scipy; when any input requires a gradient the primitive is
appended to the tape together with a closure producing the input adjoints.
Since primitives are recorded in execution order, replaying the tape in
reverse is a valid reverse topological order and visits each primitive once.

Broadcasting is limited to a (1, c) row vector, an (r, 1) column vector or a
(1, 1) scalar against an (r, c) matrix.
"""
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from exceptions import NonFiniteError, ShapeMismatchError

STD_FLOOR = 1e-8


class Tensor:
    """Row-major float64 matrix, optionally a differentiable leaf"""

    __slots__ = ("values", "requires_grad", "name")

    def __init__(self, values, requires_grad=False, name=None):
        values = np.array(values, dtype=np.float64, copy=True, order="C")
        if values.ndim == 0:
            values = values.reshape(1, 1)
        elif values.ndim == 1:
            values = values.reshape(1, -1)
        elif values.ndim != 2:
            raise ShapeMismatchError(f"Tensor must be 2-D, got {values.ndim}-D")
        self.values = values
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    def item(self):
        """Value of a 1 x 1 tensor as a Python float"""
        if self.values.size != 1:
            raise ShapeMismatchError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(values, name=None):
    """Create a trainable leaf tensor"""
    return Tensor(values, requires_grad=True, name=name)


def constant(values, name=None):
    return Tensor(values, requires_grad=False, name=name)


class _Node:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Gradients:
    """Gradient accumulators keyed by tensor identity"""

    def __init__(self):
        self._store = {}

    def _accumulate(self, tensor, grad):
        key = id(tensor)
        if key in self._store:
            held, acc = self._store[key]
            self._store[key] = (held, acc + grad)
        else:
            self._store[key] = (tensor, grad)

    def __getitem__(self, tensor):
        entry = self._store.get(id(tensor))
        if entry is None:
            return np.zeros(tensor.shape)
        return entry[1]

    def __contains__(self, tensor):
        return id(tensor) in self._store

    def items(self):
        return [(t, g) for t, g in self._store.values()]


def _broadcast_shape(op, a, b):
    if a.shape == b.shape:
        return a.shape
    for big, small in ((a.shape, b.shape), (b.shape, a.shape)):
        if small in ((1, 1), (1, big[1]), (big[0], 1)):
            return big
    raise ShapeMismatchError(f"{op}: cannot combine shapes {a.shape} and {b.shape}")


def _unbroadcast(grad, shape):
    """Sum a gradient back down to a broadcast operand's shape"""
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


class Tape:
    """Ordered record of primitives for one forward/backward pass

    A tape created with ``record=False`` evaluates forward values only.
    A single tape must not be written from several threads.
    """

    def __init__(self, record=True):
        self.record = record
        self._nodes = []
        self._produced = set()

    def __len__(self):
        return len(self._nodes)

    def _emit(self, op, inputs, value, backward):
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"{op} produced non-finite values", op=op)
        out = Tensor.__new__(Tensor)
        out.values = value
        out.name = None
        out.requires_grad = False
        if self.record and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            self._nodes.append(_Node(op, tuple(inputs), out, backward))
            self._produced.add(id(out))
        return out

    def backward(self, loss: Tensor) -> Gradients:
        """Replay the tape from a scalar loss and return leaf gradients"""
        if loss.shape != (1, 1):
            raise ShapeMismatchError(f"backward needs a 1x1 loss, got {loss.shape}")
        pending = {id(loss): np.ones((1, 1))}
        leaves = Gradients()
        for node in reversed(self._nodes):
            grad = pending.pop(id(node.output), None)
            if grad is None:
                continue
            needs = tuple(t.requires_grad for t in node.inputs)
            contributions = node.backward(grad, needs)
            for tensor, contribution in zip(node.inputs, contributions):
                if contribution is None or not tensor.requires_grad:
                    continue
                if id(tensor) in self._produced:
                    key = id(tensor)
                    pending[key] = contribution if key not in pending else pending[key] + contribution
                else:
                    leaves._accumulate(tensor, contribution)
        return leaves

    # ---- linear algebra -------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.cols != b.rows:
            raise ShapeMismatchError(f"matmul: {a.shape} @ {b.shape}")
        av, bv = a.values, b.values

        def backward(g, needs):
            return (g @ bv.T if needs[0] else None,
                    av.T @ g if needs[1] else None)
        return self._emit("matmul", (a, b), av @ bv, backward)

    def sparse_matmul(self, s, b: Tensor) -> Tensor:
        """Constant sparse operator times a dense tensor"""
        if s.shape[1] != b.rows:
            raise ShapeMismatchError(f"sparse_matmul: {s.shape} @ {b.shape}")
        s = sp.csr_matrix(s)
        value = np.asarray(s @ b.values)

        def backward(g, needs):
            return (np.asarray(s.T @ g),)
        return self._emit("sparse_matmul", (b,), value, backward)

    def transpose(self, a: Tensor) -> Tensor:
        def backward(g, needs):
            return (g.T,)
        return self._emit("transpose", (a,), np.ascontiguousarray(a.values.T), backward)

    # ---- element-wise -----------------------------------------------------

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        _broadcast_shape("add", a, b)

        def backward(g, needs):
            return (_unbroadcast(g, a.shape) if needs[0] else None,
                    _unbroadcast(g, b.shape) if needs[1] else None)
        return self._emit("add", (a, b), a.values + b.values, backward)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        _broadcast_shape("sub", a, b)

        def backward(g, needs):
            return (_unbroadcast(g, a.shape) if needs[0] else None,
                    _unbroadcast(-g, b.shape) if needs[1] else None)
        return self._emit("sub", (a, b), a.values - b.values, backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        _broadcast_shape("mul", a, b)
        av, bv = a.values, b.values

        def backward(g, needs):
            return (_unbroadcast(g * bv, a.shape) if needs[0] else None,
                    _unbroadcast(g * av, b.shape) if needs[1] else None)
        return self._emit("mul", (a, b), av * bv, backward)

    def div(self, a: Tensor, b: Tensor) -> Tensor:
        _broadcast_shape("div", a, b)
        av, bv = a.values, b.values
        if np.any(bv == 0):
            raise NonFiniteError("div: division by zero", op="div")

        def backward(g, needs):
            return (_unbroadcast(g / bv, a.shape) if needs[0] else None,
                    _unbroadcast(-g * av / (bv * bv), b.shape) if needs[1] else None)
        return self._emit("div", (a, b), av / bv, backward)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        """Multiply by a constant scalar"""
        factor = float(factor)

        def backward(g, needs):
            return (g * factor,)
        return self._emit("scale", (a,), a.values * factor, backward)

    def scale_rows(self, a: Tensor, diagonal) -> Tensor:
        """diag(diagonal) @ a for a constant vector"""
        diagonal = np.asarray(diagonal, dtype=np.float64).reshape(-1, 1)
        if diagonal.shape[0] != a.rows:
            raise ShapeMismatchError(f"scale_rows: {diagonal.shape[0]} factors for {a.rows} rows")

        def backward(g, needs):
            return (g * diagonal,)
        return self._emit("scale_rows", (a,), a.values * diagonal, backward)

    def prelu(self, x: Tensor, slope: Tensor) -> Tensor:
        """max(x, 0) + slope * min(x, 0) with a learnable 1x1 slope"""
        if slope.shape != (1, 1):
            raise ShapeMismatchError(f"prelu slope must be 1x1, got {slope.shape}")
        xv = x.values
        a = slope.values[0, 0]
        positive = xv > 0

        def backward(g, needs):
            gx = g * np.where(positive, 1.0, a) if needs[0] else None
            ga = np.array([[np.sum(g * np.where(positive, 0.0, xv))]]) if needs[1] else None
            return gx, ga
        return self._emit("prelu", (x, slope), np.where(positive, xv, a * xv), backward)

    def exp(self, a: Tensor) -> Tensor:
        with np.errstate(over="ignore"):
            value = np.exp(a.values)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError("exp overflow", op="exp")

        def backward(g, needs):
            return (g * value,)
        return self._emit("exp", (a,), value, backward)

    def log(self, a: Tensor) -> Tensor:
        av = a.values
        if np.any(av <= 0):
            raise NonFiniteError("log of a non-positive value", op="log")

        def backward(g, needs):
            return (g / av,)
        return self._emit("log", (a,), np.log(av), backward)

    def minimum(self, a: Tensor, cap: float) -> Tensor:
        """Hard clamp from above; the saturated branch passes no gradient"""
        cap = float(cap)
        active = a.values < cap

        def backward(g, needs):
            return (g * active,)
        return self._emit("minimum", (a,), np.where(active, a.values, cap), backward)

    def maximum(self, a: Tensor, floor: float) -> Tensor:
        """Hard clamp from below; the saturated branch passes no gradient"""
        floor = float(floor)
        active = a.values > floor

        def backward(g, needs):
            return (g * active,)
        return self._emit("maximum", (a,), np.where(active, a.values, floor), backward)

    # ---- reductions ---------------------------------------------------------

    def reduce_sum(self, a: Tensor) -> Tensor:
        shape = a.shape

        def backward(g, needs):
            return (np.full(shape, g[0, 0]),)
        return self._emit("reduce_sum", (a,), np.array([[a.values.sum()]]), backward)

    def row_sum(self, a: Tensor) -> Tensor:
        cols = a.cols

        def backward(g, needs):
            return (np.repeat(g, cols, axis=1),)
        return self._emit("row_sum", (a,), a.values.sum(axis=1, keepdims=True), backward)

    def column_mean(self, a: Tensor) -> Tensor:
        rows = a.rows

        def backward(g, needs):
            return (np.repeat(g / rows, rows, axis=0),)
        return self._emit("column_mean", (a,), a.values.mean(axis=0, keepdims=True), backward)

    def column_std(self, a: Tensor, floor: float = STD_FLOOR) -> Tensor:
        """Population standard deviation per column, clamped below at ``floor``"""
        rows = a.rows
        centered = a.values - a.values.mean(axis=0, keepdims=True)
        sigma = np.sqrt((centered * centered).mean(axis=0, keepdims=True))
        active = sigma > floor
        value = np.where(active, sigma, floor)

        def backward(g, needs):
            coeff = np.where(active, g / (rows * value), 0.0)
            return (centered * coeff,)
        return self._emit("column_std", (a,), value, backward)

    def frobenius_sq(self, a: Tensor) -> Tensor:
        av = a.values

        def backward(g, needs):
            return (2.0 * g[0, 0] * av,)
        return self._emit("frobenius_sq", (a,), np.array([[np.sum(av * av)]]), backward)

    # ---- indexing ---------------------------------------------------------

    def take_rows(self, a: Tensor, index) -> Tensor:
        """Gather rows by integer index (repeats allowed)"""
        index = np.asarray(index, dtype=np.int64).reshape(-1)
        if index.size and (index.min() < 0 or index.max() >= a.rows):
            raise ShapeMismatchError(f"take_rows: index out of range for {a.rows} rows")
        shape = a.shape

        def backward(g, needs):
            grad = np.zeros(shape)
            np.add.at(grad, index, g)
            return (grad,)
        return self._emit("take_rows", (a,), a.values[index], backward)

    def paired_row_dot(self, a: Tensor, b: Tensor, rows_a, rows_b, chunk: int = 8192) -> Tensor:
        """Column vector of <a[rows_a[i]], b[rows_b[i]]>

        The adjoints are sparse-times-dense products, so the gathered
        n x D row blocks never exist outside one forward chunk.
        """
        if a.cols != b.cols:
            raise ShapeMismatchError(f"paired_row_dot: widths {a.cols} and {b.cols} differ")
        rows_a = np.asarray(rows_a, dtype=np.int64).reshape(-1)
        rows_b = np.asarray(rows_b, dtype=np.int64).reshape(-1)
        if rows_a.size != rows_b.size:
            raise ShapeMismatchError("paired_row_dot: index arrays differ in length")
        av, bv = a.values, b.values
        value = np.empty((rows_a.size, 1))
        for start in range(0, rows_a.size, chunk):
            stop = start + chunk
            value[start:stop, 0] = np.einsum("ij,ij->i", av[rows_a[start:stop]], bv[rows_b[start:stop]])

        def backward(g, needs):
            pairing = sp.csr_matrix((g[:, 0], (rows_a, rows_b)), shape=(a.rows, b.rows))
            return (np.asarray(pairing @ bv) if needs[0] else None,
                    np.asarray(pairing.T @ av) if needs[1] else None)
        return self._emit("paired_row_dot", (a, b), value, backward)

    def segment_logsumexp(self, x: Tensor, segments, num_segments: int) -> Tensor:
        """Max-shifted log-sum-exp of a column vector per segment id

        Every segment in ``range(num_segments)`` must own at least one entry.
        """
        if x.cols != 1:
            raise ShapeMismatchError(f"segment_logsumexp needs a column vector, got {x.shape}")
        segments = np.asarray(segments, dtype=np.int64).reshape(-1)
        if segments.size != x.rows:
            raise ShapeMismatchError(f"{segments.size} segment ids for {x.rows} entries")
        counts = np.bincount(segments, minlength=num_segments)
        if counts.size != num_segments or np.any(counts == 0):
            raise ShapeMismatchError("segment_logsumexp: every segment needs an entry")
        xv = x.values[:, 0]
        peak = np.full(num_segments, -np.inf)
        np.maximum.at(peak, segments, xv)
        shifted = np.exp(xv - peak[segments])
        totals = np.bincount(segments, weights=shifted, minlength=num_segments)
        value = (peak + np.log(totals)).reshape(-1, 1)
        softmax = shifted / totals[segments]

        def backward(g, needs):
            return ((g[segments, 0] * softmax).reshape(-1, 1),)
        return self._emit("segment_logsumexp", (x,), value, backward)


def grad_check(f: Callable[[Tape], Tensor], params: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences

    ``f`` builds a scalar loss on the tape it receives from the current
    values of ``params``. The error for each entry is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-7, 1e-4], got {eps}")

    def probe():
        value = f(Tape(record=False)).item()
        if not np.isfinite(value):
            raise NonFiniteError("loss is non-finite at a probe point", op="grad_check")
        return value

    tape = Tape()
    grads = tape.backward(f(tape))
    worst = 0.0
    for p in params:
        analytic = grads[p].reshape(-1)
        flat = p.values.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            upper = probe()
            flat[idx] = original - eps
            lower = probe()
            flat[idx] = original
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, abs(analytic[idx] - numeric) / max(1.0, abs(numeric)))
    return worst


def sum_all(tape: Tape, terms: Iterable[Tensor]) -> Tensor:
    """Sum a sequence of 1x1 tensors"""
    terms = list(terms)
    if not terms:
        return Tensor(0.0)
    total = terms[0]
    for term in terms[1:]:
        total = tape.add(total, term)
    return total
