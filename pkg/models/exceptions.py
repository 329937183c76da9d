"""Error hierarchy shared by the solver, the assimilation layer and the harness"""


class DarcyDAError(Exception):
    """Base class for all errors raised by this package"""


class ConfigurationError(DarcyDAError, ValueError):
    """Incompatible grids, parities, interpolants or out-of-range parameters"""


class ConfigParseError(ConfigurationError):
    """Problem in an experiment file, pinned to a key and (when known) a line"""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class StepRejectedError(DarcyDAError, RuntimeError):
    """A time step that would break the explicit stability limits"""


class WindowRejectedError(DarcyDAError, ValueError):
    """A fitting window that cannot produce a decay rate"""


class SnapshotFormatError(DarcyDAError, ValueError):
    """Malformed or incompatible field snapshot"""
