"""Physics-informed convolutional networks with loss-function and architecture search."""

from .tensor import Tensor, ShapeError

__all__ = ["Tensor", "ShapeError"]
__version__ = "0.1.0"
