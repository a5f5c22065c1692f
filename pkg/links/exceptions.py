class LinkError(Exception):
    """Base error for the simulation library. Maps to exit code 1."""
    exit_code = 1


class ConfigurationError(LinkError):
    exit_code = 2


class SymmetryError(ConfigurationError):
    """Active set is not Hermitian-symmetric, so P would not be real."""


class SizeError(LinkError):
    pass


class NumericalError(LinkError):
    def __init__(self, message, drivers=()):
        super().__init__(message)
        self.drivers = tuple(drivers)


class SingularityError(LinkError):
    def __init__(self, message, count=None, bin_index=None):
        super().__init__(message)
        self.count = count
        self.bin_index = bin_index


class SynthesisError(LinkError):
    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class CalibrationError(LinkError):
    pass


class EqualizationError(SingularityError):
    pass
