"""Exception hierarchy shared by all stages."""


class TsBosonError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(TsBosonError, ValueError):
    pass


class DegenerateRowError(TsBosonError, ValueError):
    pass


class SizeLimitError(TsBosonError, ValueError):
    pass


class DegenerateDistributionError(TsBosonError, ValueError):
    """All collision-free probabilities vanished, nothing to normalize."""


class EmptyLogError(TsBosonError, ValueError):
    pass


class EmptyEstimateError(TsBosonError, ValueError):
    pass


class StreamParseError(TsBosonError, ValueError):
    def __init__(self, path, line, text):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: cannot parse time tag {text!r}")


class StreamIntegrityError(TsBosonError, ValueError):
    def __init__(self, path, line, message="time tags are not sorted"):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class CalibrationError(TsBosonError, RuntimeError):
    def __init__(self, channels):
        self.channels = list(channels)
        super().__init__(f"delay calibration failed for channel(s) {self.channels}")


class UnknownChannelError(TsBosonError, KeyError):
    pass


class UnattainableEfficiencyError(TsBosonError, ValueError):
    pass


class ConfigError(TsBosonError, ValueError):
    pass


class StageError(TsBosonError, RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


class MissingStageError(TsBosonError, FileNotFoundError):
    pass
