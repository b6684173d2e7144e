"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input is outside the domain an operation is defined on."""


class DivergenceError(RuntimeError):
    """An iterative computation hit its iteration cap without converging."""


class SearchSpaceError(ValueError):
    """An exhaustive search was refused because the space is too large."""


class CancelledError(RuntimeError):
    """A long-running operation observed its cancellation token."""


class GameFileError(ValueError):
    """A game/potential/profile/shaping file is malformed or invalid."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or references missing files."""
