"""
HMAFlow optical flow estimation

This Python package estimates dense optical flow between two frames. It builds two-level
all-pairs cost volumes, searches them with multiple Chebyshev neighbourhoods, fuses the two
levels into one global cost volume, reweights it with a correlation self-attention block
and refines the flow with a convolutional GRU. The numerical substrate is a small numpy
tensor library with reverse-mode automatic differentiation, so the whole pipeline trains
and runs on a CPU without a deep learning framework.
"""

__version__ = "0.1.0-alpha.1"
