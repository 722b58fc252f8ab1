"""Exception types shared across the package."""


class DataError(Exception):
    """Invalid or inconsistent input data (files, manifests, annotations)."""


class DecodeError(Exception):
    """Decoding could not produce a result."""


class NoPathError(DecodeError):
    """No legal path exists for the given sequence (e.g. too few frames)."""


class BeamPrunedError(DecodeError):
    """All surviving hypotheses were pruned; retry with a wider beam."""
