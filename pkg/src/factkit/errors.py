"""Exception types shared across the toolkit.

Every error raised by the library subclasses :class:`FactkitError` so callers
(and the CLI exit-code mapping) can distinguish library failures from bugs.
"""

from __future__ import annotations


class FactkitError(Exception):
    """Base class for all library errors."""


# --- taxonomy / annotation ---

class UnknownEnumValue(FactkitError):
    """A raw field value falls outside the accepted enumeration."""

    def __init__(self, field: str, value: object):
        self.field = field
        self.value = value
        super().__init__(f"unknown value {value!r} for field {field!r}")


# --- data files and splitting ---

class ParseError(FactkitError):
    """A record line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class DuplicateId(FactkitError):
    """Two records share the same id."""

    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate record id {record_id!r}")


class EmptyInput(FactkitError):
    """An operation that needs at least one element received none."""


# --- embedding storage and transport ---

class BadMagic(FactkitError):
    """Embedding or checkpoint file does not start with the expected header."""


class TruncatedFile(FactkitError):
    """File byte count does not match what its header declares."""


class DimensionMismatch(FactkitError):
    """Array shapes or id lists do not line up."""


class ZeroVector(FactkitError):
    """A row with zero norm cannot be normalized."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has zero norm")


class TransportError(FactkitError):
    """The embedding endpoint could not be reached."""


class ProtocolError(FactkitError):
    """The embedding endpoint answered outside its contract."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned status {status}: {body[:200]}")


class DimensionDrift(FactkitError):
    """The embedding endpoint returned inconsistent dimensions across batches."""


# --- clustering and sampling ---

class KTooLarge(FactkitError):
    """Requested more clusters than there are points."""


class AlignmentError(FactkitError):
    """Facts and cluster assignments have different lengths."""


# --- model training ---

class EmptySplit(FactkitError):
    """A split needed for training or evaluation contains no facts."""


class NonFiniteLoss(FactkitError):
    """Training produced a NaN or infinite loss."""


class LabelOutOfRange(FactkitError):
    """A target index does not fit the category's label count."""


# --- metrics and agreement ---

class LengthMismatch(FactkitError):
    """Gold and predicted sequences differ in length."""


class SchemaMismatch(FactkitError):
    """Reports or models being combined do not share a label space."""


class NoComparableUnits(FactkitError):
    """No unit carries two or more ratings, so agreement is undefined."""


class MissingRatings(FactkitError):
    """A statistic that needs complete rating tables saw missing entries."""


class OutOfRange(FactkitError):
    """A value lies outside its documented domain."""


# --- baseline features ---

class EmptyVocabulary(FactkitError):
    """Every candidate term was filtered out of the vocabulary."""


# --- corpus analysis ---

class EmptyTables(FactkitError):
    """Distribution aggregation received no prediction tables or no facts."""


# --- CLI ---

class ConfigError(FactkitError):
    """The run configuration file or flags are invalid."""
