"""
Dense tensor with reverse-mode automatic differentiation.

A `Tensor` wraps a row-major numpy array of float32 or float64 values. Every differentiable
operation is a `Function` subclass; applying it records the function on the output tensor,
and `Tensor.backward` walks the recorded graph in reverse topological order. Gradient
accumulation follows a fixed order, so repeated runs produce bit-identical gradients.
"""

import contextlib
import contextvars
from typing import Any, Iterator, Optional, Sequence
import numpy as np

from hmaflow.etc.errors import AutodiffError, NonFiniteValues, ShapeMismatch

_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar('hmaflow_grad_enabled', default=True)
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph recording inside the block. The switch is context-local, so a worker thread
    has to enter its own `no_grad` block.
    """
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def is_grad_enabled() -> bool:
    """
    Whether operations currently record the autodiff graph.
    """
    return _GRAD_ENABLED.get()


def unbroadcast(grad: np.ndarray,
                shape: tuple[int, ...],
                ) -> np.ndarray:
    """
    Sum out broadcast dimensions so that a gradient matches the shape of its input.
    :param grad: The gradient in the broadcast (output) shape.
    :param shape: The shape of the input the gradient belongs to.
    :return: The gradient reduced to `shape`.
    """
    if grad.shape == shape:
        return grad

    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)

    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)

    return grad.reshape(shape)


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement `forward` on raw numpy arrays and `backward`, which receives the
    gradient of the loss with respect to the output and returns one gradient (or None) per
    tensor input, in input order.
    """

    def __init__(self, *inputs: 'Tensor'):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f'{type(self).__name__} does not implement forward')

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f'{type(self).__name__} does not implement backward')

    @classmethod
    def apply(cls, *inputs: 'Tensor', **kwargs: Any) -> 'Tensor':
        """
        Run the forward pass and record the function on the output when tracking is on.
        :param inputs: The tensor inputs of the operation.
        :param kwargs: Non-tensor options forwarded to `forward`.
        :return: The output tensor.
        """
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)

        if not requires_grad:
            func.inputs = ()
            return Tensor(out)

        return Tensor(out, requires_grad=True, _creator=func)


class Tensor:
    """
    A dense n-dimensional array of f32 or f64 values with optional gradient tracking.
    """

    __array_priority__ = 1000

    def __init__(self,
                 data: Any,
                 *,
                 dtype: Any = None,
                 requires_grad: bool = False,
                 name: Optional[str] = None,
                 _creator: Optional[Function] = None,
                 ):
        """
        Initialise a tensor.
        :param data: Array-like values. Integer and boolean inputs are converted to float32.
        :param dtype: Optional dtype, float32 or float64.
        :param requires_grad: Whether gradients are tracked for this tensor.
        :param name: Optional name, used in error messages.
        """
        array = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
        if array.dtype not in SUPPORTED_DTYPES:
            if dtype is not None:
                raise ShapeMismatch(f'Unsupported tensor dtype {array.dtype}, expected float32 or float64')
            array = array.astype(np.float32)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeMismatch(f'Tensor extents must be positive, got shape {array.shape}')

        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._creator = _creator

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._creator is None

    def numpy(self) -> np.ndarray:
        """
        Return a copy of the values as a numpy array.
        """
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f'item() requires a single-element tensor, got shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        """
        A tensor sharing the values but cut from the graph.
        """
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def check_finite(self, context: str = None) -> 'Tensor':
        """
        Validate that every value is finite.
        :param context: Description of the tensor for the error message.
        :return: This tensor, to allow chaining.
        """
        if not np.all(np.isfinite(self.data)):
            bad = int(np.size(self.data) - np.count_nonzero(np.isfinite(self.data)))
            label = context or self.name or 'tensor'
            raise NonFiniteValues(f'{label} contains {bad} non-finite value(s)')
        return self

    def _topological_order(self) -> list['Tensor']:
        """
        Iterative depth-first ordering of the graph ending at this tensor, inputs before outputs.
        """
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]

        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))

            if node._creator is not None:
                for parent in reversed(node._creator.inputs):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))

        return order

    def backward(self, grad: np.ndarray = None):
        """
        Backpropagate from this scalar tensor, accumulating into `grad` of every tracked leaf.
        :param grad: Optional seed gradient, defaults to one.
        """
        if self.data.size != 1:
            raise AutodiffError(f'backward() requires a scalar tensor, got shape {self.shape}')
        if not self.requires_grad:
            raise AutodiffError('backward() called on a tensor that does not require grad')

        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.dtype).reshape(self.shape)
        grads: dict[int, np.ndarray] = {id(self): seed}

        for node in reversed(self._topological_order()):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue

            if node._creator is None:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue

            input_grads = node._creator.backward(node_grad)
            for parent, parent_grad in zip(node._creator.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue

                parent_grad = unbroadcast(np.asarray(parent_grad), parent.shape).astype(parent.dtype, copy=False)
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    def _wrap(self, other: Any) -> 'Tensor':
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other: Any) -> 'Tensor':
        return Add.apply(self, self._wrap(other))

    def __radd__(self, other: Any) -> 'Tensor':
        return Add.apply(self._wrap(other), self)

    def __sub__(self, other: Any) -> 'Tensor':
        return Sub.apply(self, self._wrap(other))

    def __rsub__(self, other: Any) -> 'Tensor':
        return Sub.apply(self._wrap(other), self)

    def __mul__(self, other: Any) -> 'Tensor':
        return Mul.apply(self, self._wrap(other))

    def __rmul__(self, other: Any) -> 'Tensor':
        return Mul.apply(self._wrap(other), self)

    def __truediv__(self, other: Any) -> 'Tensor':
        return Div.apply(self, self._wrap(other))

    def __rtruediv__(self, other: Any) -> 'Tensor':
        return Div.apply(self._wrap(other), self)

    def __neg__(self) -> 'Tensor':
        return Neg.apply(self)

    def __pow__(self, exponent: float) -> 'Tensor':
        if isinstance(exponent, Tensor):
            raise ShapeMismatch('Only scalar exponents are supported')
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other: 'Tensor') -> 'Tensor':
        return MatMul.apply(self, self._wrap(other))

    def __getitem__(self, index: Any) -> 'Tensor':
        return GetItem.apply(self, index=index)

    def sum(self, axis: int | Sequence[int] | None = None, keepdims: bool = False) -> 'Tensor':
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | Sequence[int] | None = None, keepdims: bool = False) -> 'Tensor':
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis: int | Sequence[int] | None = None, keepdims: bool = False) -> 'Tensor':
        return Max.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def permute(self, *axes: int) -> 'Tensor':
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Permute.apply(self, axes=axes)

    def transpose(self, axis0: int, axis1: int) -> 'Tensor':
        axes = list(range(self.ndim))
        axes[axis0], axes[axis1] = axes[axis1], axes[axis0]
        return self.permute(*axes)

    def exp(self) -> 'Tensor':
        return Exp.apply(self)

    def log(self) -> 'Tensor':
        return Log.apply(self)

    def sqrt(self) -> 'Tensor':
        return Sqrt.apply(self)

    def abs(self) -> 'Tensor':
        return Abs.apply(self)

    def tanh(self) -> 'Tensor':
        return Tanh.apply(self)

    def sigmoid(self) -> 'Tensor':
        return Sigmoid.apply(self)

    def relu(self) -> 'Tensor':
        return Relu.apply(self)

    def astype(self, dtype: Any) -> 'Tensor':
        if np.dtype(dtype) == self.dtype:
            return self
        return Cast.apply(self, dtype=np.dtype(dtype))

    def __repr__(self) -> str:
        grad_flag = ', requires_grad=True' if self.requires_grad else ''
        return f'Tensor(shape={self.shape}, dtype={self.dtype}{grad_flag})'


class Add(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x + y

    def backward(self, grad: np.ndarray):
        return grad, grad


class Sub(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x - y

    def backward(self, grad: np.ndarray):
        return grad, -grad


class Mul(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        self.x, self.y = x, y
        return x * y

    def backward(self, grad: np.ndarray):
        return grad * self.y, grad * self.x


class Div(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        self.x, self.y = x, y
        return x / y

    def backward(self, grad: np.ndarray):
        return grad / self.y, -grad * self.x / (self.y * self.y)


class Neg(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return -x

    def backward(self, grad: np.ndarray):
        return (-grad,)


class Pow(Function):
    def forward(self, x: np.ndarray, *, exponent: float) -> np.ndarray:
        self.x, self.exponent = x, exponent
        return np.power(x, exponent).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray):
        return (grad * self.exponent * np.power(self.x, self.exponent - 1),)


class Exp(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.exp(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.log(x)

    def backward(self, grad: np.ndarray):
        return (grad / self.x,)


class Sqrt(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * 0.5 / self.out,)


class Abs(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad: np.ndarray):
        return (grad * self.sign,)


class Tanh(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * (1 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        # Split by sign so large magnitudes do not overflow exp
        out = np.empty_like(x)
        positive = x >= 0
        out[positive] = 1 / (1 + np.exp(-x[positive]))
        exp_x = np.exp(x[~positive])
        out[~positive] = exp_x / (1 + exp_x)
        self.out = out
        return out

    def backward(self, grad: np.ndarray):
        return (grad * self.out * (1 - self.out),)


class Relu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray):
        return (grad * self.mask,)


class Cast(Function):
    def forward(self, x: np.ndarray, *, dtype: np.dtype) -> np.ndarray:
        if dtype not in SUPPORTED_DTYPES:
            raise ShapeMismatch(f'Unsupported tensor dtype {dtype}, expected float32 or float64')
        self.source_dtype = x.dtype
        return x.astype(dtype)

    def backward(self, grad: np.ndarray):
        return (grad.astype(self.source_dtype),)


class Sum(Function):
    def forward(self, x: np.ndarray, *, axis=None, keepdims: bool = False) -> np.ndarray:
        self.shape = x.shape
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray):
        if self.axis is not None and not self.keepdims:
            axes = (self.axis,) if isinstance(self.axis, int) else tuple(self.axis)
            axes = tuple(a % len(self.shape) for a in axes)
            grad = np.expand_dims(grad, axis=tuple(sorted(axes)))
        return (np.broadcast_to(grad, self.shape).copy(),)


class Max(Function):
    def forward(self, x: np.ndarray, *, axis=None, keepdims: bool = False) -> np.ndarray:
        out = x.max(axis=axis, keepdims=True)
        # Ties share the gradient evenly
        mask = (x == out)
        self.weights = (mask / mask.sum(axis=axis, keepdims=True)).astype(x.dtype)
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(out if keepdims else np.squeeze(out, axis=axis))

    def backward(self, grad: np.ndarray):
        if not self.keepdims:
            if self.axis is None:
                grad = np.reshape(grad, (1,) * self.weights.ndim)
            else:
                axes = (self.axis,) if isinstance(self.axis, int) else tuple(self.axis)
                axes = tuple(a % self.weights.ndim for a in axes)
                grad = np.expand_dims(grad, axis=tuple(sorted(axes)))
        return ((grad * self.weights).astype(self.weights.dtype, copy=False),)


class MatMul(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if x.ndim < 2 or y.ndim < 2:
            raise ShapeMismatch(f'matmul requires operands of rank >= 2, got {x.shape} and {y.shape}')
        if x.shape[-1] != y.shape[-2]:
            raise ShapeMismatch(f'matmul inner dimensions differ: {x.shape} @ {y.shape}')
        self.x, self.y = x, y
        return np.matmul(x, y)

    def backward(self, grad: np.ndarray):
        return np.matmul(grad, np.swapaxes(self.y, -1, -2)), np.matmul(np.swapaxes(self.x, -1, -2), grad)


class Reshape(Function):
    def forward(self, x: np.ndarray, *, shape: tuple[int, ...]) -> np.ndarray:
        self.shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise ShapeMismatch(f'Cannot reshape {x.shape} into {tuple(shape)}') from e

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.shape),)


class Permute(Function):
    def forward(self, x: np.ndarray, *, axes: tuple[int, ...]) -> np.ndarray:
        if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
            raise ShapeMismatch(f'Invalid permutation {axes} for rank {x.ndim}')
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad: np.ndarray):
        return (np.transpose(grad, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, x: np.ndarray, *, index: Any) -> np.ndarray:
        self.shape = x.shape
        self.index = index
        return np.array(x[index], dtype=x.dtype)

    def backward(self, grad: np.ndarray):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as e:
            raise ShapeMismatch(
                f'Cannot concatenate shapes {[a.shape for a in arrays]} along axis {axis}'
            ) from e

    def backward(self, grad: np.ndarray):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class Take(Function):
    """
    Gather along one axis with a one-dimensional index array.
    """

    def forward(self, x: np.ndarray, *, indices: np.ndarray, axis: int) -> np.ndarray:
        self.shape = x.shape
        self.indices = np.asarray(indices, dtype=np.int64)
        self.axis = axis % x.ndim
        return np.take(x, self.indices, axis=self.axis)

    def backward(self, grad: np.ndarray):
        # Scatter-add along the axis, repeated indices accumulate in index order
        moved = np.moveaxis(grad, self.axis, 0)
        full = np.zeros((self.shape[self.axis],) + moved.shape[1:], dtype=grad.dtype)
        np.add.at(full, self.indices, moved)
        return (np.moveaxis(full, 0, self.axis),)


class Pad(Function):
    def forward(self, x: np.ndarray, *, widths: tuple[tuple[int, int], ...], value: float = 0.0) -> np.ndarray:
        if len(widths) != x.ndim:
            raise ShapeMismatch(f'Padding widths {widths} do not match rank {x.ndim}')
        self.slices = tuple(slice(before, before + extent) for (before, _), extent in zip(widths, x.shape))
        return np.pad(x, widths, mode='constant', constant_values=value)

    def backward(self, grad: np.ndarray):
        return (grad[self.slices],)


class Softmax(Function):
    def forward(self, x: np.ndarray, *, axis: int = -1) -> np.ndarray:
        shifted = x - x.max(axis=axis, keepdims=True)
        exp_x = np.exp(shifted)
        self.out = exp_x / exp_x.sum(axis=axis, keepdims=True)
        self.axis = axis
        return self.out

    def backward(self, grad: np.ndarray):
        inner = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)
