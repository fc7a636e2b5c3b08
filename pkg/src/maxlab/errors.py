"""Exception types shared across the package."""


class MaxlabError(Exception):
    """Base class for all errors raised by maxlab."""


class DomainError(MaxlabError, ValueError):
    """A point was queried outside the open set it must belong to."""


class ConfigurationError(MaxlabError, ValueError):
    """Invalid domain, grid or experiment configuration."""


class ParameterError(MaxlabError, ValueError):
    """A numerical parameter is out of its admissible range."""


class EdgeError(MaxlabError, ValueError):
    """A finite-difference stencil would leave the sampling grid."""
