class InvalidArgumentError(ValueError):
    pass


class NumericalDegeneracyError(ArithmeticError):
    """A factorisation or normalisation hit a (near-)singular quantity."""


class ConfigError(ValueError):
    pass


class DegenerateSampleError(NumericalDegeneracyError):
    pass
