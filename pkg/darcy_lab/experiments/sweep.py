"""The epsilon sweep: for every eps solve the eps-Stokes problem on the
Dirichlet box and record every regularity measurement.

Independent per-eps tasks run through `map_ordered`, so the records come
out in the same order for any worker count.
"""

from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar
import concurrent.futures
import logging
import os

import numpy as np

from ..discrete.cell import *
from ..discrete.errors import *
from ..discrete.extension import *
from ..discrete.forcing import *
from ..discrete.geometry import *
from ..discrete.grid import *
from ..discrete.regularity import *
from ..discrete.stokes import *
from .config import *
from .fitting import *
from .report import *

__all__ = [
    "THREADS_ENV",
    "boundary_layer_fit",
    "map_ordered",
    "run_sweep",
    "solve_epsilon",
    "solve_unit_cell",
    "worker_count",
]

logger = logging.getLogger(__name__)

THREADS_ENV = "DARCY_LAB_THREADS"

T = TypeVar("T")
U = TypeVar("U")


def worker_count() -> int:
  text = os.environ.get(THREADS_ENV, "1")
  try:
    count = int(text)
  except ValueError:
    raise ConfigurationError(f"expected a positive integer (got {text!r})",
                             key=THREADS_ENV) from None
  if count < 1:
    raise ConfigurationError(f"expected a positive integer (got {count})",
                             key=THREADS_ENV)
  return count


def map_ordered(fn: Callable[[T], U], items: Iterable[T]) -> List[U]:
  """fn over items on DARCY_LAB_THREADS workers, results in input order."""
  items = list(items)
  workers = min(worker_count(), max(1, len(items)))
  if workers == 1:
    return [fn(item) for item in items]
  with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
    return list(pool.map(fn, items))


def solve_unit_cell(config: ExperimentConfig,
                    resolution: Optional[int] = None) -> CellSolution:
  """The cell problem for the configured obstacle."""
  return solve_cell_problem(config.unit_mask(),
                            resolution or config.cell_resolution,
                            tol=min(config.tol, 1e-10),
                            inner=config.inner)


def solve_epsilon(config: ExperimentConfig,
                  epsilon: float,
                  topology: str = BOX,
                  f: Optional[FaceField] = None,
                  unit: Optional[np.ndarray] = None,
                  tol: Optional[float] = None) -> FlowState:
  """Solves the eps-problem on (-R, R)^d with the configured forcing (or
  the face field `f`)."""
  grid = config.fine_grid(epsilon, topology)
  unit = config.unit_mask() if unit is None else unit
  domain = perforate(unit, epsilon, grid)
  system = assemble(domain, mu=config.mu, inner=config.inner)
  if f is None:
    f = sample_faces(config.forcing(), grid)
  return solve(system,
               f,
               tol=config.tol if tol is None else tol,
               max_iter=config.solver["max_iter"])


def _radii(config: ExperimentConfig, epsilon: float) -> List[float]:
  """r = factor * eps for the configured factors, kept while r <= R/4."""
  limit = config.extent / 4 * (1 + 1e-12)
  radii = sorted({f * epsilon for f in config.sweep["r_factors"]})
  return [r for r in radii if epsilon * (1 - 1e-12) <= r <= limit]


def _delta_values(config: ExperimentConfig,
                  epsilon: float) -> List[Tuple[float, bool]]:
  """(delta in rescaled units, admissible) for the configured deltas.

  Entries landing on an earlier value (2eps = 0.5 at eps_unit 1/4) are
  dropped.
  """
  eps_unit = round(epsilon / (config.extent / 3.0), 12)
  out = []  # type: List[Tuple[float, bool]]
  for factor, relative in config.deltas():
    delta = round(factor * eps_unit if relative else float(factor), 12)
    if any(delta == d for d, _ in out):
      continue
    out.append((delta, eps_unit < delta <= 1.0))
  return out


def boundary_layer_fit(
    state: FlowState,
    deltas: Sequence[float],
    sup_f: Optional[float] = None) -> Tuple[List[Measurement], RateFit]:
  """Boundary-layer measurements over `deltas` and the fitted delta^sigma."""
  values = [boundary_layer_norm(state, d, sup_f) for d in deltas]
  fit = fit_rate([(m.delta, m.ratio) for m in values])
  return values, fit


class _Collector:
  """Appends records, turning package errors into flagged rows."""

  def __init__(self, experiment_id: str, epsilon: float):
    self.experiment_id = experiment_id
    self.epsilon = epsilon
    self.records = []  # type: List[Record]

  def add(self, quantity: str, fn: Callable[[], object], **params):
    try:
      result = fn()
    except DarcyLabError as e:
      logger.warning("eps=%g %s %s: %s", self.epsilon, quantity, params, e)
      self.records.append(
          Record.failed(self.experiment_id, self.epsilon, quantity, e,
                        **params))
      return None
    for m in result if isinstance(result, list) else [result]:
      if isinstance(m, ExcessReport):
        m = m.measurement
      if isinstance(m, Measurement):
        self.records.append(Record.of(self.experiment_id, self.epsilon, m))
    return result

  def fit(self, quantity: str, points: Sequence[Tuple[float, float]],
          **params):
    usable = [(s, v) for s, v in points if v > 0]
    if len(usable) < MIN_POINTS:
      self.records.append(
          Record(self.experiment_id,
                 quantity,
                 epsilon=self.epsilon,
                 flag="insufficient_points",
                 **params))
      return
    try:
      fit = fit_rate(usable)
    except ValueError as e:
      logger.warning("eps=%g %s: %s", self.epsilon, quantity, e)
      self.records.append(
          Record.failed(self.experiment_id, self.epsilon, quantity, e,
                        **params))
      return
    self.records.append(
        Record.of_fit(self.experiment_id, self.epsilon, quantity, fit,
                      **params))


def _measure(config: ExperimentConfig, cell: CellSolution, epsilon: float,
             unit: np.ndarray) -> List[Record]:
  out = _Collector(config.experiment_id, epsilon)
  forcing = config.forcing()
  alpha = config.alpha
  R = config.extent
  try:
    state = solve_epsilon(config, epsilon, unit=unit)
  except DarcyLabError as e:
    logger.warning("eps=%g: solve failed: %s", epsilon, e)
    return [Record.failed(config.experiment_id, epsilon, "solve", e)]
  _, div = residual(state.system, state)
  out.records.append(
      Record(config.experiment_id,
             "divergence",
             epsilon=epsilon,
             lhs=div,
             rhs=1e-8,
             ratio=div / 1e-8))
  out.add("energy_balance",
          lambda: Measurement.of("energy_balance",
                                 *energy_balance(state.system, state)))
  out.add("pressure_estimate",
          lambda: Measurement.of("pressure_estimate",
                                 *pressure_estimate_ratio(state)))
  tiled = tile_corrector(cell, epsilon, state.grid)

  excess_u, excess_grad = [], []
  for r in _radii(config, epsilon):
    out.add("lipschitz", lambda: lipschitz_quantity(state, forcing, r, R, alpha))
    out.add("average_bound",
            lambda: average_bound_ratio(state, forcing, r, R, alpha))
    report = out.add("excess",
                     lambda: excess(state, cell, r, forcing, R, alpha, tiled))
    if isinstance(report, ExcessReport):
      out.records.extend([
          Record.of(config.experiment_id, epsilon,
                    Measurement.of(name, value, report.rhs, r=r, R=R))
          for name, value in (("excess_u", report.excess_u),
                              ("excess_grad", report.excess_grad),
                              ("excess_p", report.excess_p))
      ])
      excess_u.append((r, report.excess_u))
      excess_grad.append((r, report.excess_grad))
    out.add("pressure_excess",
            lambda: pressure_excess(state, cell, r, forcing, R, alpha))
  out.fit("excess_u_rate", excess_u, R=R)
  out.fit("excess_grad_rate", excess_grad, R=R)

  for k in config.sweep["caccioppoli_radii"]:
    radius = k * epsilon
    if 2 * radius > R * (1 + 1e-12) or radius < 2 * epsilon * (1 - 1e-12):
      continue
    out.add("caccioppoli", lambda: caccioppoli_ratio(state, radius, "2R"),
            R=radius)
    out.add("caccioppoli_r_plus_eps",
            lambda: caccioppoli_ratio(state, radius, "R+eps"),
            R=radius)
  radius = config.reverse_holder_radius
  for q in config.sweep["reverse_holder_q"]:
    out.add("reverse_holder",
            lambda: reverse_holder_ratio(state, q, radius),
            R=radius,
            q=q)
  for q in config.sweep["poincare_q"]:
    out.add("poincare", lambda: poincare_ratio(state, q), q=q)
  out.add("pressure_mean_drift",
          lambda: pressure_mean_drift(state, forcing, R, alpha))

  sup_f = forcing.sup_norm(R)
  layer = []
  for delta, admissible in _delta_values(config, epsilon):
    if not admissible:
      continue
    m = out.add("boundary_layer",
                lambda: boundary_layer_norm(state, delta, sup_f),
                delta=delta)
    if isinstance(m, Measurement):
      layer.append((delta, m.ratio))
  out.fit("boundary_layer_rate", layer)

  ext = extend_pressure(state, state.domain)
  check = check_mean_property(ext, state, state.domain, R)
  out.records.append(
      Record(config.experiment_id,
             "mean_property",
             epsilon=epsilon,
             R=R,
             lhs=check.deviation,
             rhs=1e-13 * max(1.0, float(np.max(np.abs(state.p)))),
             flag="" if check.asserted else "not_asserted"))
  logger.info("eps=%g: %d records", epsilon, len(out.records))
  return out.records


def run_sweep(config: ExperimentConfig) -> List[Record]:
  """Every measurement at every eps of the config, in a fixed order."""
  if not config.epsilons:
    raise ConfigurationError("empty epsilon list", key="sweep.epsilons")
  unit = config.unit_mask()
  cell = solve_unit_cell(config)
  logger.info("sweep %s: K=%s", config.experiment_id, cell.K.tolist())
  tables = map_ordered(lambda eps: _measure(config, cell, eps, unit),
                       config.epsilons)
  return [r for table in tables for r in table]
