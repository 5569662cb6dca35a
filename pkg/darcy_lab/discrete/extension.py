"""Extensions of the velocity and pressure from Q_R^eps to all of Q_R.

The velocity is extended by zero. The pressure extension P_eps equals p in
the fluid and, inside every obstacle copy eps(Y_s + z) whose period
eps(Y + z) lies in Q_R, the mean of p over eps(Y_f + z).
"""

from typing import Optional, Sequence, Tuple, Union
import logging

import numpy as np

from .errors import *
from .geometry import *
from .grid import *
from .stokes import *

__all__ = [
    "MeanPropertyCheck",
    "PressureExtension",
    "check_copy_means",
    "check_mean_property",
    "extend_pressure",
    "extend_velocity",
]

logger = logging.getLogger(__name__)

_MEAN_TOL = 1e-13


def extend_velocity(state: Union[FlowState, Sequence[np.ndarray]],
                    domain: PerforatedDomain) -> FaceField:
  u = state.u if isinstance(state, FlowState) else state
  return [
      np.where(mask, np.asarray(c, dtype=float), 0.0)
      for c, mask in zip(u, domain.fluid_faces)
  ]


class PressureExtension:
  """P_eps on all cells; `excluded` marks solid cells of partial copies."""

  def __init__(self, values: np.ndarray, excluded: np.ndarray,
               copy_labels: np.ndarray, interior: np.ndarray):
    self.values = values
    self.excluded = excluded
    self.copy_labels = copy_labels
    self.interior = interior
    for a in (values, excluded, copy_labels, interior):
      a.flags.writeable = False

  @property
  def included(self) -> np.ndarray:
    return ~self.excluded

  def __repr__(self):
    return (f"PressureExtension(interior_copies={int(self.interior.sum())}, "
            f"excluded_cells={int(self.excluded.sum())})")


def _copy_labels(domain: PerforatedDomain) -> Tuple[np.ndarray, np.ndarray]:
  """Linear copy id per cell and, per id, whether the copy lies in Q_R."""
  z = domain.copy_index()
  z = z - z.min()
  per_axis = int(z.max()) + 1
  grids = np.meshgrid(*([z] * domain.grid.dim), indexing="ij")
  labels = np.ravel_multi_index(tuple(grids), (per_axis,) * domain.grid.dim)
  counts = np.bincount(labels.ravel(), minlength=per_axis**domain.grid.dim)
  interior = counts == domain.period_cells**domain.grid.dim
  return labels, interior


def extend_pressure(state: Union[FlowState, np.ndarray],
                    domain: PerforatedDomain) -> PressureExtension:
  p = np.asarray(state.p if isinstance(state, FlowState) else state,
                 dtype=float)
  domain.grid.check_cells(p)
  fluid = domain.fluid_cells
  labels, interior = _copy_labels(domain)
  n_copies = interior.size
  sums = np.bincount(labels[fluid], weights=p[fluid], minlength=n_copies)
  counts = np.bincount(labels[fluid], minlength=n_copies)
  means = np.divide(sums,
                    counts,
                    out=np.zeros(n_copies),
                    where=counts > 0)
  values = np.where(fluid, p, means[labels])
  excluded = ~fluid & ~interior[labels]
  ext = PressureExtension(values, excluded, labels, interior)
  logger.debug("pressure extension: %s", ext)
  return ext


class MeanPropertyCheck:
  """avg_{Q_R} P_eps against avg_{Q_R^eps} p, asserted only when R in eps N."""

  def __init__(self, asserted: bool, deviation: float, holds: bool):
    self.asserted = asserted
    self.deviation = deviation
    self.holds = holds

  def __repr__(self):
    return (f"MeanPropertyCheck(asserted={self.asserted}, "
            f"deviation={self.deviation:.3e}, holds={self.holds})")


def check_mean_property(extension: PressureExtension,
                        p: Union[FlowState, np.ndarray],
                        domain: PerforatedDomain,
                        R: Optional[float] = None) -> MeanPropertyCheck:
  R = domain.grid.extent if R is None else R
  p = np.asarray(p.p if isinstance(p, FlowState) else p, dtype=float)
  fluid = domain.fluid_cells
  lhs = float(np.mean(extension.values))
  rhs = float(np.mean(p[fluid]))
  deviation = abs(lhs - rhs)
  periods = R / domain.epsilon
  asserted = (abs(periods - round(periods)) <= 1e-9 * max(1.0, periods) and
              not extension.excluded.any())
  scale = max(1.0, float(np.max(np.abs(p[fluid]))) if fluid.any() else 1.0)
  holds = asserted and deviation <= _MEAN_TOL * scale
  return MeanPropertyCheck(asserted, deviation, holds)


def check_copy_means(extension: PressureExtension,
                     p: Union[FlowState, np.ndarray],
                     domain: PerforatedDomain) -> float:
  """Largest |avg over eps(Y + z) of P_eps - avg over eps(Y_f + z) of p|
  over the interior copies."""
  p = np.asarray(p.p if isinstance(p, FlowState) else p, dtype=float)
  labels = extension.copy_labels
  fluid = domain.fluid_cells
  n_copies = extension.interior.size
  full = np.bincount(labels.ravel(),
                     weights=extension.values.ravel(),
                     minlength=n_copies) / np.maximum(
                         np.bincount(labels.ravel(), minlength=n_copies), 1)
  f_counts = np.bincount(labels[fluid], minlength=n_copies)
  fluid_mean = np.bincount(labels[fluid],
                           weights=p[fluid],
                           minlength=n_copies) / np.maximum(f_counts, 1)
  keep = extension.interior & (f_counts > 0)
  if not keep.any():
    return 0.0
  return float(np.max(np.abs(full - fluid_mean)[keep]))
