"""
Exceptions definitions for the HMAFlow package.
"""

class HmaFlowError(Exception):
    """
    Base class for all HMAFlow exceptions.
    """

    def __init__(self,
                 message: str = 'An error occurred in HMAFlow',
                 exit_code: int = 1
                 ):
        super().__init__(message)

        self.message = message
        self.exit_code = exit_code


class FilesNotFound(HmaFlowError, FileNotFoundError):
    """Raised when required input files are not found."""
    def __init__(self,
                 message: str = 'Required input files not found',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class ShapeMismatch(HmaFlowError, ValueError):
    """Raised when tensor shapes or extents do not satisfy an operation's contract."""
    def __init__(self,
                 message: str = 'Tensor shape mismatch',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class NonFiniteValues(HmaFlowError, FloatingPointError):
    """Raised when NaN or Inf values are detected in a tensor or coordinate set."""
    def __init__(self,
                 message: str = 'Non-finite values encountered',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class ResolutionMismatch(HmaFlowError, ValueError):
    """Raised when a flow field or volume is at the wrong resolution for an operation."""
    def __init__(self,
                 message: str = 'Resolution mismatch',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class InvalidConfiguration(HmaFlowError, ValueError):
    """Raised when an operation receives an invalid option or parameter."""
    def __init__(self,
                 message: str = 'Invalid configuration',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class CapacityExceeded(HmaFlowError, ValueError):
    """Raised when an input exceeds the size a model was built for."""
    def __init__(self,
                 message: str = 'Input exceeds model capacity',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class AutodiffError(HmaFlowError, RuntimeError):
    """Raised when backpropagation is requested on an unsupported graph."""
    def __init__(self,
                 message: str = 'Automatic differentiation failed',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class InvalidFloFile(HmaFlowError, ValueError):
    """Raised when a Middlebury flow file is malformed."""
    def __init__(self,
                 message: str = 'not a .flo file',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)


class WeightsFormatError(HmaFlowError, ValueError):
    """Raised when a weights container is malformed or does not match the model."""
    def __init__(self,
                 message: str = 'Invalid weights container',
                 exit_code: int = 1
                 ):
        super().__init__(message, exit_code)
