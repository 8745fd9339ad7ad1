"""
Parameter containers and the basic parameterised layers.
"""

import math
from typing import Any, Iterator, Optional
import numpy as np

from hmaflow.etc.errors import WeightsFormatError
from hmaflow.etc.utils import get_rng
from hmaflow.tensor import Tensor, ConvSpec, conv2d, layer_norm, instance_norm


class Parameter(Tensor):
    """
    A gradient-tracking leaf tensor owned by a module.
    """

    def __init__(self, data: Any, name: Optional[str] = None):
        super().__init__(np.asarray(data), requires_grad=True, name=name)


class Module:
    """
    Base class of every network component. Parameters and sub-modules assigned as
    attributes are registered in assignment order, which fixes the state dict order.
    """

    def __init__(self):
        object.__setattr__(self, '_parameters', {})
        object.__setattr__(self, '_modules', {})
        object.__setattr__(self, 'training', True)

    def __setattr__(self, name: str, value: Any):
        if isinstance(value, Parameter):
            self._parameters[name] = value
            self._modules.pop(name, None)
        elif isinstance(value, Module):
            self._modules[name] = value
            self._parameters.pop(name, None)
        object.__setattr__(self, name, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError(f'{type(self).__name__} does not implement forward')

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        """
        Yield (dotted name, parameter) pairs, own parameters first, then sub-modules.
        """
        for name, param in self._parameters.items():
            yield f'{prefix}{name}', param
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix=f'{prefix}{name}.')

    def parameters(self) -> list[Parameter]:
        return [param for _, param in self.named_parameters()]

    def modules(self) -> Iterator['Module']:
        yield self
        for module in self._modules.values():
            yield from module.modules()

    def num_parameters(self) -> int:
        return sum(param.size for param in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: param.numpy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True):
        """
        Copy values into the parameters.
        :param state: Mapping of dotted parameter names to arrays.
        :param strict: Whether missing and unexpected names are errors.
        """
        own = dict(self.named_parameters())
        problems = []

        missing = [name for name in own if name not in state]
        unexpected = [name for name in state if name not in own]
        if strict:
            problems += [f'missing {name}' for name in missing]
            problems += [f'unexpected {name}' for name in unexpected]

        for name, value in state.items():
            if name in own and tuple(np.shape(value)) != own[name].shape:
                problems.append(f'{name} has shape {tuple(np.shape(value))}, expected {own[name].shape}')

        if problems:
            raise WeightsFormatError('Weights do not match the model: ' + '; '.join(problems))

        for name, value in state.items():
            if name in own:
                param = own[name]
                param.data = np.array(value, dtype=param.dtype)
                param.zero_grad()

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()

    def to_dtype(self, dtype: Any) -> 'Module':
        """
        Convert every parameter in place, e.g. to float64 for gradient checks.
        """
        for param in self.parameters():
            param.data = param.data.astype(dtype)
            param.zero_grad()
        return self

    def train(self, mode: bool = True) -> 'Module':
        for module in self.modules():
            object.__setattr__(module, 'training', mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)


class ModuleList(Module):
    """
    An indexable sequence of sub-modules, registered as '0', '1', ...
    """

    def __init__(self, modules: list[Module] = None):
        super().__init__()
        for module in modules or []:
            self.append(module)

    def append(self, module: Module):
        setattr(self, str(len(self._modules)), module)

    def __getitem__(self, index: int) -> Module:
        return list(self._modules.values())[index]

    def __iter__(self) -> Iterator[Module]:
        return iter(self._modules.values())

    def __len__(self) -> int:
        return len(self._modules)


class Conv2d(Module):
    """
    2D convolution layer with Kaiming-normal (fan-out) initialisation and zero bias.
    """

    def __init__(self,
                 in_channels: int,
                 out_channels: int,
                 kernel_size: int | tuple[int, int],
                 stride: int | tuple[int, int] = 1,
                 padding: int | tuple[int, int] = 0,
                 groups: int = 1,
                 bias: bool = True,
                 rng: np.random.Generator = None,
                 ):
        super().__init__()
        self.spec = ConvSpec.build(in_channels, out_channels, kernel_size, stride, padding, groups)
        rng = rng if rng is not None else get_rng()

        _, _, kh, kw = self.spec.kernel
        std = math.sqrt(2.0 / (out_channels * kh * kw))
        self.weight = Parameter(rng.normal(0.0, std, size=self.spec.kernel).astype(np.float32))
        self.bias = Parameter(np.zeros(out_channels, dtype=np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.spec, self.weight, self.bias)


class Linear(Module):
    """
    Affine map over the last axis, weight stored as [in_features, out_features].
    """

    def __init__(self,
                 in_features: int,
                 out_features: int,
                 bias: bool = True,
                 rng: np.random.Generator = None,
                 ):
        super().__init__()
        rng = rng if rng is not None else get_rng()
        bound = 1.0 / math.sqrt(in_features)

        self.weight = Parameter(rng.uniform(-bound, bound, size=(in_features, out_features)).astype(np.float32))
        self.bias = Parameter(np.zeros(out_features, dtype=np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(dim, dtype=np.float32))
        self.bias = Parameter(np.zeros(dim, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.weight, self.bias, self.eps)


class InstanceNorm2d(Module):
    """
    Non-affine instance normalisation.
    """

    def __init__(self, eps: float = 1e-5):
        super().__init__()
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return instance_norm(x, self.eps)
