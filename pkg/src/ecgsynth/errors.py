"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` which the CLI prints
alongside the human message.
"""

from __future__ import annotations


class EcgSynthError(Exception):
    code = "Error"


class DataError(EcgSynthError):
    code = "DataError"


class FileNotFound(DataError, FileNotFoundError):
    code = "FileNotFound"


class MalformedRow(DataError):
    code = "MalformedRow"

    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class LengthMismatch(DataError, ValueError):
    code = "LengthMismatch"

    def __init__(self, expected: int, found: int):
        super().__init__(f"expected length {expected}, found {found}")
        self.expected = expected
        self.found = found


class InvalidTargetLength(DataError, ValueError):
    code = "InvalidTargetLength"


class ConstantBeat(DataError, ValueError):
    code = "ConstantBeat"


class SampleTooLarge(DataError, ValueError):
    code = "SampleTooLarge"


class DegenerateSplit(DataError, ValueError):
    code = "DegenerateSplit"


class EmptySet(EcgSynthError, ValueError):
    code = "EmptySet"


class LengthZero(EcgSynthError, ValueError):
    code = "LengthZero"


class BandTooNarrow(EcgSynthError, ValueError):
    code = "BandTooNarrow"


class InvalidInputs(EcgSynthError, ValueError):
    code = "InvalidInputs"


class EpochMismatch(EcgSynthError, ValueError):
    code = "EpochMismatch"


class ShapeMismatch(EcgSynthError, ValueError):
    code = "ShapeMismatch"


class MissingCache(EcgSynthError, RuntimeError):
    code = "MissingCache"


class BadLabel(EcgSynthError, ValueError):
    code = "BadLabel"


class BadConfig(EcgSynthError, ValueError):
    code = "BadConfig"


class NonFiniteLoss(EcgSynthError, FloatingPointError):
    code = "NonFiniteLoss"

    def __init__(self, epoch: int, batch: int, detail: str = ""):
        msg = f"non-finite loss at epoch {epoch}, batch {batch}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.epoch = epoch
        self.batch = batch


class CheckpointError(EcgSynthError):
    code = "CorruptCheckpoint"


class CorruptCheckpoint(CheckpointError):
    code = "CorruptCheckpoint"


class VersionMismatch(CheckpointError):
    code = "VersionMismatch"


class ChecksumMismatch(CheckpointError):
    code = "ChecksumMismatch"


class InsufficientData(EcgSynthError, ValueError):
    code = "InsufficientData"


class SingleClassTrainSet(EcgSynthError, ValueError):
    code = "SingleClassTrainSet"


class EmptyTestSet(EcgSynthError, ValueError):
    code = "EmptyTestSet"


class RunDirectoryExists(EcgSynthError, FileExistsError):
    code = "RunDirectoryExists"
