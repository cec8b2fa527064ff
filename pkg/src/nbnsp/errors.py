"""Exception types shared across the package.

The CLI maps these onto its exit-code discipline: usage errors exit 1,
data/parse errors exit 2, numerical/convergence failures exit 3.
"""


class DataError(ValueError):
    """Malformed input data or configuration file content."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy or convergence target."""


class EstimationError(NumericalError):
    """Estimation is impossible on the given data (e.g. an empty component)."""
