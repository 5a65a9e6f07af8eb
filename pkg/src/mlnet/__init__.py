"""Multi-label text classification: hierarchical attention encoder,
pairwise-ranking label scores, label-count decoding, and example-based
evaluation."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
