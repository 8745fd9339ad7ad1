from .module import Parameter, Module, ModuleList, Conv2d, Linear, LayerNorm, InstanceNorm2d
