"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so the CLI can emit a
machine-parsable failure line.
"""

from __future__ import annotations


class QoeSeqError(ValueError):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# ingestion
class MissingColumn(QoeSeqError):
    pass


class NonNumericCell(QoeSeqError):
    def __init__(self, row: int, col: str, value: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col!r}: not a finite number: {value!r}")


class DuplicateTimestep(QoeSeqError):
    def __init__(self, session: str, t: int):
        self.session = session
        self.t = t
        super().__init__(f"session {session!r}: duplicate timestep t={t}")


class GapInTimesteps(QoeSeqError):
    def __init__(self, session: str, t: int):
        self.session = session
        self.t = t
        super().__init__(f"session {session!r}: expected timestep t={t}")


class QoEOutOfRange(QoeSeqError):
    def __init__(self, row: int, value: float):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: qoe {value} outside [1, 100]")


class EmptyDataset(QoeSeqError):
    pass


class DimensionMismatch(QoeSeqError):
    pass


class ScoreOutOfRange(QoeSeqError):
    pass


class InvalidStateCount(QoeSeqError):
    pass


class TooFewSessions(QoeSeqError):
    pass


class InvalidSpec(QoeSeqError):
    pass


# vector quantization
class TooFewDistinctPoints(QoeSeqError):
    pass


class NonFiniteInput(QoeSeqError):
    pass


class EmptyInput(QoeSeqError):
    pass


# hmm / baselines
class IndexOutOfRange(QoeSeqError):
    pass


class NegativeAlpha(QoeSeqError):
    pass


class TokenOutOfRange(QoeSeqError):
    pass


class EmptySequence(QoeSeqError):
    pass


class ZeroProbabilitySequence(QoeSeqError):
    pass


class InvalidModel(QoeSeqError):
    pass


# evaluation
class LengthMismatch(QoeSeqError):
    pass


class EmptyMatrix(QoeSeqError):
    pass


class InvalidRepetitions(QoeSeqError):
    pass


# cli / serialization
class ConfigInvalid(QoeSeqError):
    pass


class FileMissing(QoeSeqError):
    pass


class SchemaMismatch(QoeSeqError):
    pass
