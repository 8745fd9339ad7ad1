from .hmaflow import HmaFlow
