"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class AmsrcError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AmsrcError):
    """Invalid or unknown configuration key/value, bad CLI usage."""


class DataError(AmsrcError):
    """Malformed or missing input data (files, boxes, flows, labels)."""


class MissingArtifactError(DataError):
    """A pipeline stage ran before its prerequisite produced its output."""

    def __init__(self, artifact: str, required_command: str):
        self.artifact = artifact
        self.required_command = required_command
        super().__init__(
            f"missing {artifact}; run `amsrc {required_command}` first"
        )


class InsufficientHistoryError(AmsrcError):
    """A box sits too early in its video to assemble a full clip.

    Callers building clip collections catch this and drop the box.
    """


class NumericalError(AmsrcError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: int | None = None, report=None):
        self.step = step
        self.report = report
        super().__init__(message)
