"""Error taxonomy shared by every seqsqueeze module.

Class names double as the stable error identifiers printed by the CLI
(``error: <Name>: <message>``) and mapped 1:1 by language bindings, so
they carry no ``Error`` suffix.
"""


class SeqSqueezeError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteInput(SeqSqueezeError):
    """Input matrix contains NaN or Inf (possibly after float32 narrowing)."""


class EmptyInput(SeqSqueezeError):
    """Input matrix has zero rows or zero columns."""


class DimensionMismatch(SeqSqueezeError):
    """Vectors or tables that must share a dimension do not."""


class TooShort(SeqSqueezeError):
    """Sequence too short to split into sources and destinations."""


class InsufficientMergeable(SeqSqueezeError):
    """A merge pass was asked for more merges than have in-window candidates."""


class CannotReachTarget(SeqSqueezeError):
    """No source can legally merge while the sequence is still above target."""


class UnavailableRatio(SeqSqueezeError):
    """The requested keep ratio cannot be realized by this method."""


class SpecMismatch(SeqSqueezeError):
    """Provenance or sequence does not match the synthesis spec it claims."""


class BadMagic(SeqSqueezeError):
    """Array file is not a well-formed v1.0 container."""


class UnsupportedDtype(SeqSqueezeError):
    """Array file declares a dtype or memory layout outside the accepted subset."""


class UnsupportedRank(SeqSqueezeError):
    """Array file shape is not a 2-D shape of non-negative integers."""


class TruncatedPayload(SeqSqueezeError):
    """Array file payload length disagrees with the header-declared size."""


class OversizeArray(SeqSqueezeError):
    """Header-declared payload exceeds the configured allocation cap."""


class SchemaViolation(SeqSqueezeError):
    """Provenance document is missing required keys or has malformed values."""


class IoFailure(SeqSqueezeError):
    """Underlying filesystem operation failed."""
