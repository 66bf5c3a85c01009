"""Exceptions and warnings raised by the beamcover modules."""


class BeamCoverError(Exception):
    """Base error. `exit_code` is the CLI status used when it escapes a command."""

    exit_code = 1


class InvalidGeometryError(BeamCoverError, ValueError):
    pass


class DegenerateManifoldError(BeamCoverError, ValueError):
    pass


class DimensionError(BeamCoverError, ValueError):
    pass


class AngleDomainError(BeamCoverError, ValueError):
    pass


class InvalidThresholdError(BeamCoverError, ValueError):
    pass


class EmptyVisibilityError(BeamCoverError, ValueError):
    pass


class EmptyCodebookError(BeamCoverError, ValueError):
    pass


class UncoverablePointError(BeamCoverError):
    """No candidate covers a grid point. `angles` holds the point in degrees."""

    exit_code = 3

    def __init__(self, angles):
        self.angles = tuple(float(a) for a in angles)
        pretty = ", ".join(f"{a:.4f}" for a in self.angles)
        super().__init__(f"grid point ({pretty}) deg is not covered by any candidate")


class VerificationError(BeamCoverError):
    exit_code = 4


class FingerprintMismatchError(BeamCoverError):
    exit_code = 5

    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"fingerprint mismatch: config has '{expected}', codebook has '{found}'")


class ConfigError(BeamCoverError, ValueError):
    exit_code = 2

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class CodebookParseError(BeamCoverError, ValueError):
    exit_code = 2

    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}, line {line_number}: {message}")


class GratingLobeWarning(UserWarning):
    pass


class RootRegimeWarning(UserWarning):
    pass
