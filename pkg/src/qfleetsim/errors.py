"""Base exception for everything this package raises on purpose."""


class QFleetError(Exception):
    """Root of the package exception hierarchy.

    The CLI maps any QFleetError to exit code 1 (validation) or 2 (runtime);
    module-specific subclasses live next to the code that raises them.
    """
