"""Dense float64 tensors with reverse-mode differentiation.

Every operation records a node in a lightweight computation graph; calling
:func:`backward` on a scalar loss walks the graph in reverse topological
order and returns gradients for a named parameter set.  A central
finite-difference oracle (:func:`finite_diff_check`) provides an independent
check of the analytic gradients.

Scope is deliberately small: 2-D matrix products, an affine map with a bias
broadcast over batch rows, ReLU, mean-squared-error loss, plus the row
selection and stacking plumbing the forecasting models need.  No GPU, no
sparsity, no broadcasting beyond the bias add.
"""

import numpy as np

from .errors import ContractError, DimensionError, EmptyInputError, OracleError

__all__ = [
    "Tensor",
    "ParamSet",
    "as_tensor",
    "matmul",
    "affine",
    "relu",
    "mse_loss",
    "select_row",
    "stack",
    "reshape",
    "backward",
    "finite_diff_check",
]


class Tensor:
    """A dense, row-major float64 array plus its place in the graph.

    ``data`` is always a C-contiguous ``np.float64`` array.  Leaf tensors
    (inputs, parameters) have no parents; op results remember their parents
    and a vector-Jacobian product used during :func:`backward`.  Values are
    treated as immutable once produced; only the training loop rewrites
    parameter data in place.
    """

    __slots__ = ("data", "_parents", "_vjp")

    def __init__(self, data, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def as_tensor(value) -> Tensor:
    """Wrap arrays/sequences as a leaf Tensor; pass Tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class ParamSet:
    """Ordered, uniquely named collection of parameter tensors."""

    def __init__(self, items):
        self._names = []
        self._tensors = {}
        for name, tensor in items:
            if name in self._tensors:
                raise ContractError(f"duplicate parameter name {name!r}")
            self._names.append(name)
            self._tensors[name] = as_tensor(tensor)

    def names(self) -> list[str]:
        return list(self._names)

    def items(self):
        return [(name, self._tensors[name]) for name in self._names]

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def copy(self) -> "ParamSet":
        """Deep copy of names and values (fresh leaf tensors)."""
        return ParamSet([(n, Tensor(t.data.copy())) for n, t in self.items()])

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}{self._tensors[n].shape}" for n in self._names)
        return f"ParamSet({inner})"


def _check_2d(t: Tensor, what: str) -> None:
    if t.data.ndim != 2:
        raise DimensionError(f"{what} must be 2-D, got shape {t.shape}")


def matmul(a, b) -> Tensor:
    """Matrix product of two 2-D tensors, differentiable in both operands."""
    a, b = as_tensor(a), as_tensor(b)
    _check_2d(a, "matmul left operand")
    _check_2d(b, "matmul right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}"
        )
    a_data, b_data = a.data, b.data

    def vjp(g):
        return g @ b_data.T, a_data.T @ g

    return Tensor(a_data @ b_data, (a, b), vjp)


def affine(x, w, b) -> Tensor:
    """``x @ w.T + b`` with the bias broadcast over batch rows.

    ``x`` is (batch, d_in), ``w`` is (d_out, d_in), ``b`` is (d_out,).
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _check_2d(x, "affine input")
    _check_2d(w, "affine weight")
    if b.data.ndim != 1:
        raise DimensionError(f"affine bias must be 1-D, got shape {b.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"affine input width {x.shape} does not match weight {w.shape}"
        )
    if w.shape[0] != b.shape[0]:
        raise DimensionError(
            f"affine bias {b.shape} does not match weight {w.shape}"
        )
    x_data, w_data = x.data, w.data

    def vjp(g):
        return g @ w_data, g.T @ x_data, g.sum(axis=0)

    return Tensor(x_data @ w_data.T + b.data, (x, w, b), vjp)


def relu(x) -> Tensor:
    """Elementwise ``max(0, v)``; the subgradient at exactly 0 is 0."""
    x = as_tensor(x)
    mask = x.data > 0.0

    def vjp(g):
        return (g * mask,)

    return Tensor(np.where(mask, x.data, 0.0), (x,), vjp)


def mse_loss(pred, target) -> Tensor:
    """Mean squared error ``(1/n) * sum((pred_i - target_i)^2)`` as a scalar.

    Both arguments are flattened; differentiable with respect to ``pred``
    (and ``target``, when a graph tensor is passed).
    """
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.size == 0:
        raise EmptyInputError("mse_loss over zero elements")
    if pred.size != target.size:
        raise DimensionError(
            f"mse_loss length mismatch: pred {pred.shape} vs target {target.shape}"
        )
    diff = pred.data.reshape(-1) - target.data.reshape(-1)
    n = diff.size
    pred_shape, target_shape = pred.shape, target.shape

    def vjp(g):
        scale = 2.0 * float(g) / n
        return (
            (scale * diff).reshape(pred_shape),
            (-scale * diff).reshape(target_shape),
        )

    return Tensor(np.mean(diff * diff), (pred, target), vjp)


def select_row(x, index: int) -> Tensor:
    """Row ``index`` of a 2-D tensor as a (1, cols) tensor."""
    x = as_tensor(x)
    _check_2d(x, "select_row input")
    rows = x.shape[0]
    if not 0 <= index < rows:
        raise DimensionError(f"row index {index} out of range for shape {x.shape}")
    shape = x.shape

    def vjp(g):
        out = np.zeros(shape)
        out[index, :] = g[0, :]
        return (out,)

    return Tensor(x.data[index : index + 1, :].copy(), (x,), vjp)


def stack(tensors) -> Tensor:
    """Stack same-shape tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise EmptyInputError("stack of zero tensors")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise DimensionError(f"stack shape mismatch: {shape} vs {t.shape}")

    def vjp(g):
        return tuple(g[i] for i in range(len(tensors)))

    return Tensor(np.stack([t.data for t in tensors]), tuple(tensors), vjp)


def reshape(x, shape) -> Tensor:
    """Reshape without copying semantics; gradients flow back untouched."""
    x = as_tensor(x)
    orig = x.shape
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {orig} to {shape}") from None

    def vjp(g):
        return (np.asarray(g).reshape(orig),)

    return Tensor(data, (x,), vjp)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of the graph rooted at ``root``."""
    order: list[Tensor] = []
    seen: set[int] = set()
    work: list[tuple[Tensor, bool]] = [(root, False)]
    while work:
        node, expanded = work.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        work.append((node, True))
        for parent in node._parents:
            work.append((parent, False))
    return order


def backward(loss: Tensor, params: ParamSet) -> dict[str, Tensor]:
    """Reverse-mode gradients of a scalar loss for every parameter.

    Parameters that do not appear in the loss graph get zero gradients.
    Gradients are returned as fresh leaf tensors keyed exactly by the
    parameter names.
    """
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise ContractError("backward expects a scalar loss tensor")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.array(pg, dtype=np.float64, copy=True)
    out: dict[str, Tensor] = {}
    for name, tensor in params.items():
        g = grads.get(id(tensor))
        out[name] = Tensor(g if g is not None else np.zeros_like(tensor.data))
    return out


def finite_diff_check(f, params: ParamSet, h: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and central differences.

    ``f`` maps the parameter set to a scalar loss tensor and must be
    deterministic.  Each parameter entry is nudged by ``+/- h`` in place
    (and restored), so ``f`` has to read the live parameter data.
    """
    if h <= 0:
        raise ContractError(f"finite-difference step must be positive, got {h}")
    loss = f(params)
    value = loss.item()
    if not np.isfinite(value):
        raise OracleError(f"function value is not finite: {value!r}")
    analytic = backward(loss, params)
    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        grad_flat = analytic[name].data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = f(params).item()
            flat[i] = saved - h
            f_minus = f(params).item()
            flat[i] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise OracleError(
                    f"non-finite probe for parameter {name!r} entry {i}"
                )
            numeric = (f_plus - f_minus) / (2.0 * h)
            ana = grad_flat[i]
            rel = abs(ana - numeric) / (abs(ana) + abs(numeric) + 1e-12)
            worst = max(worst, rel)
    return worst
