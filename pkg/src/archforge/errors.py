"""Exception hierarchy shared by every archforge stage."""

from __future__ import annotations


class BlueprintError(Exception):
    """Base class for all archforge failures."""


class ParseError(BlueprintError):
    """Source text could not be tokenized or parsed.

    Carries enough location detail to point at the offending line.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = path
            if line is not None:
                prefix += f":{line}"
            prefix += ": "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
        self.message = message


class StoreError(BlueprintError):
    """Module set violates a store-level rule (duplicates, import cycles)."""


class NotFoundError(BlueprintError):
    """Lookup of a declaration name or blueprint label failed."""


class ResolutionError(BlueprintError):
    """An explicitly written dependency could not be resolved."""


class RenderError(BlueprintError):
    """Nodes cannot be rendered (conflicting merge metadata)."""


class ConversionError(BlueprintError):
    """Legacy blueprint sources could not be parsed or rewritten."""


class StaleSourceError(ConversionError):
    """A file changed between planning and applying a conversion."""


class ConfigError(BlueprintError):
    """Project configuration file is malformed."""


class LockError(BlueprintError):
    """Another archforge process holds the build lock."""
