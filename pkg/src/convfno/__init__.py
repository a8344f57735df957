"""Conv-FNO: a CNN local-feature pre-extractor in front of a Fourier neural operator."""
from .tensor import Tape, Tensor, TapeError, backward

__version__ = "0.1.0"

__all__ = ["Tape", "Tensor", "TapeError", "backward", "__version__"]
