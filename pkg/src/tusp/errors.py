"""Exception types shared across the package."""


class StructuralError(ValueError):
    """A plan, instance or graph that is malformed (dangling ids, bad shapes)."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration for a pipeline stage."""


class SchemaError(ValueError):
    """A file whose kind or schema version is not the one expected."""
