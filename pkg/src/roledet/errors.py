"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, anything else -> 4.
"""


class RoledetError(Exception):
    """Base class for package-specific failures."""


class ConfigError(RoledetError):
    """Invalid or inconsistent run configuration."""


class DataError(RoledetError):
    """Problem with input data files."""


class CorpusError(DataError):
    """Malformed or inconsistent corpus record."""


class FormatError(DataError):
    """Corrupt or unsupported binary artifact (embedding table, model file)."""


class PipelineError(RoledetError):
    """A pipeline stage failed; carries the stage name, original cause chained."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
