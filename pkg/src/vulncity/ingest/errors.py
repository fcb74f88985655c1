"""Shared error type for artifact parsing."""


class IngestError(ValueError):
    """Raised when an input artifact is unreadable or violates its schema.

    Per-record problems (a finding missing its method, a dangling call edge)
    do not raise; they are skipped or flagged and reported in the document's
    warnings list. Only document-level defects abort the parse.
    """
