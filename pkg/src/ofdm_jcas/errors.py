"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid waveform, detector or experiment configuration."""


class ModelValidityError(ValueError):
    """A scenario falls outside what the simplified channel model can represent.

    Raised when a target violates the cyclic-prefix delay bound or the
    Doppler-versus-subcarrier-spacing bound, instead of silently producing
    output corrupted by inter-symbol or inter-carrier interference.
    """
