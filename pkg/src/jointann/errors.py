"""Typed errors raised across the library."""


class JointAnnError(Exception):
    """Base class for all library errors."""


class FilterFamilyMismatch(JointAnnError):
    """Attribute and filter (or two attributes) belong to different families."""


class DimensionMismatch(JointAnnError):
    """Vector dimensions disagree."""


class UnsatisfiableFilter(JointAnnError):
    """Boolean predicate with no satisfying assignment."""


class EmptyIndex(JointAnnError):
    """Search requested on an index with no points."""


class DegenerateAttributeSample(JointAnnError):
    """All attributes in a sample are identical; weight derivation is undefined."""


class IndexFormatError(JointAnnError):
    """Index file is corrupt, truncated, or has an unknown version."""


class DatasetFormatError(JointAnnError):
    """Dataset file is corrupt, truncated, or carries an unexpected tag."""
