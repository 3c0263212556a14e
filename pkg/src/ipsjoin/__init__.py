"""Inner-product similarity join toolkit.

Gap embeddings that turn Orthogonal Vectors into approximate inner-product
joins, LSH and linear-sketch structures for maximum inner product search, and
generators and verifiers for staircase sequences that limit asymmetric LSH.
"""

from . import core, dataio, embeddings, lowerbound, lsh, ovp, sketch

__version__ = "0.1.0"

__all__ = ["core", "dataio", "embeddings", "lowerbound", "lsh", "ovp", "sketch", "__version__"]
