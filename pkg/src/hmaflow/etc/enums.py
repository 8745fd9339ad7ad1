"""
Enumeration types used throughout the HMAFlow package.
"""

from enum import Enum


class AlignmentMode(Enum):
    """
    The operator that brings the quarter-resolution motion volume down to eighth resolution.
    """
    CONV2X2 = 'conv2x2'
    CONV3X3 = 'conv3x3'
    AVGPOOL = 'avgpool'
    MAXPOOL = 'maxpool'


class Level(Enum):
    """
    The feature pyramid level a cost volume is built at.
    """
    QUARTER = 'quarter'
    EIGHTH = 'eighth'

    @property
    def stride(self) -> int:
        """
        The downsampling factor of this level relative to the input image.
        """
        return 4 if self is Level.QUARTER else 8


class MotionKind(Enum):
    """
    The parametric motion model used to generate synthetic training pairs.
    """
    TRANSLATE = 'translate'
    ROTATE = 'rotate'
    ZOOM = 'zoom'


class Resolution(Enum):
    """
    The resolution a flow field is expressed at.
    """
    EIGHTH = 'eighth'
    FULL = 'full'


class SearchStrategy(Enum):
    """
    How motion features are retrieved from the base cost volumes.
    """
    MULTI_SCALE = 'multi_scale'
    AVERAGE_POOLING = 'average_pooling'
