"""Exception classes shared across the package.

The CLI reports solver failures by class name, so these names are part
of the machine-readable interface.
"""


class NehariForgeError(Exception):
    """Base class for solver and configuration errors."""


class GridMismatch(NehariForgeError, ValueError):
    """A field does not belong to the grid it is used with."""


class NotPositiveDefinite(NehariForgeError):
    """The operator has a non-positive direction (CG hit negative curvature)."""


class NonConvergence(NehariForgeError):
    """An iterative method exhausted its iteration budget."""


class ZeroField(NehariForgeError):
    """A projection was asked to scale a field with no mass."""


class PartVanished(ZeroField):
    """A sign-changing iterate lost its positive or negative part."""


class ConfigError(NehariForgeError, ValueError):
    """The run configuration is invalid."""
