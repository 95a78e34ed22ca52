"""Exception types shared across the package."""


class SettlematchError(Exception):
    """Base class for all package-specific errors."""


class AlignmentError(SettlematchError, ValueError):
    """Grids are misaligned, off-lattice, or have incompatible resolutions."""


class FormatError(SettlematchError, ValueError):
    """An input file violates the supported format subset."""


class ConfigError(SettlematchError, ValueError):
    """A pipeline or generator configuration is invalid."""


class ComputationError(SettlematchError, ValueError):
    """A metric or model is undefined for the given inputs."""
