"""Training-free compression of token sequences (L x D float32 matrices).

The main entry points are compress() with a CompressionConfig, the
array/provenance readers and writers in tensor_io, and the synthetic
generators plus reference oracles in testkit. The seqsqueeze command
wraps the same operations for files on disk.
"""

from .compress import CompressionResult, compress
from .core import (
    METHODS,
    WEIGHTINGS,
    CompressionConfig,
    MergeRecord,
    MergeTrace,
    PassRecord,
    Provenance,
    TokenSequence,
    target_length,
    validate_sequence,
)
from . import errors

__all__ = [
    "METHODS",
    "WEIGHTINGS",
    "CompressionConfig",
    "CompressionResult",
    "MergeRecord",
    "MergeTrace",
    "PassRecord",
    "Provenance",
    "TokenSequence",
    "compress",
    "errors",
    "target_length",
    "validate_sequence",
]
