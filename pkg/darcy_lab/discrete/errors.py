"""Exception types raised by the numerical core.

Everything derives from the standard exception a caller would expect
(`ValueError` for bad inputs, `RuntimeError` for solver failures) and from
`DarcyLabError`, so drivers can catch the package's failures in one place.
"""

from typing import Optional

__all__ = [
    "ConfigurationError",
    "ConnectivityViolation",
    "DarcyLabError",
    "DomainTooSmall",
    "IncompatibleData",
    "NonConvergence",
    "SeparationViolation",
    "SingularSystem",
]


class DarcyLabError(Exception):
  """Common base of all errors raised by darcy_lab."""


class ConfigurationError(DarcyLabError, ValueError):
  """An invalid combination of grid, geometry or experiment settings.

  `key` names the offending configuration key when one is known.
  """

  def __init__(self, message: str, key: Optional[str] = None):
    super().__init__(message)
    self.key = key

  def __str__(self):
    message = super().__str__()
    if self.key:
      return f"{self.key}: {message}"
    return message


class SeparationViolation(ConfigurationError):
  """The voxelized obstacle comes closer to the unit-cell boundary than allowed."""


class ConnectivityViolation(ConfigurationError):
  """The fluid part of the unit cell is not connected."""


class IncompatibleData(DarcyLabError, ValueError):
  """The data admit no solution (e.g. nonzero mean forcing on an empty torus)."""


class DomainTooSmall(DarcyLabError, ValueError):
  """A measurement box is below the period or leaves the grid."""


class NonConvergence(DarcyLabError, RuntimeError):
  """An iterative solver exhausted its iteration budget."""

  def __init__(self, iterations: int, residual: float, what: str = "solver"):
    super().__init__(f"{what} did not converge after {iterations} iterations "
                     f"(relative residual {residual:.3e})")
    self.iterations = iterations
    self.residual = residual


class SingularSystem(DarcyLabError, RuntimeError):
  """A direct factorization met a singular matrix."""
