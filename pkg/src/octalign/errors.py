"""Exception types shared across the package."""


class OctalignError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OctalignError):
    """Raised when a configuration file or preset is invalid.

    The message always names the offending section.key so that a user can
    fix the INI file without reading source code.
    """


class BasisTooSmallError(OctalignError):
    """Raised when requested quantum numbers do not fit in the basis."""


class InvalidFieldError(OctalignError):
    """Raised when a field array violates grid or boundary requirements."""


class MonotonicityError(OctalignError):
    """Raised when no admissible step with a non-negative cost change exists.

    This signals a broken update rule (or a filter so aggressive that even a
    vanishing step fails), not a numerical tolerance issue.
    """


class DegenerateTargetError(OctalignError):
    """Raised when the alignment target state is not uniquely defined."""


class FileFormatError(OctalignError):
    """Raised on malformed data files; messages carry path:line locations."""
