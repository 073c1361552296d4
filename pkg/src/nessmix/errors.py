"""Exception hierarchy shared by all nessmix modules."""


class NessMixError(Exception):
    """Base class for every error raised by nessmix."""


class ConfigError(NessMixError):
    """Invalid user input (bad parameters, malformed configs, rejected kernels)."""


class NumericError(NessMixError):
    """A numerical procedure could not deliver a result."""


class NonPositiveBoundary(ConfigError):
    pass


class DegenerateInterval(ConfigError):
    pass


class OutOfSupport(ConfigError):
    pass


class LevelExceeded(ConfigError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class BoxExceeded(ConfigError):
    """A probe left the working box a recursion-built family was fitted on."""


class KernelRejected(ConfigError):
    """A generating factor failed the symmetry / positivity gate."""


class QuadratureFailure(NumericError):
    pass


class DivergentIntegral(NumericError):
    pass


class InversionFailure(NumericError):
    pass


class EmptySupport(NumericError):
    pass
