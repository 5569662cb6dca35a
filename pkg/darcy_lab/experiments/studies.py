"""Studies run alongside the sweep: two-scale compactness, W^{1,q} ratios,
the Liouville tiling check, the permeability refinement study and the
verification suite that backs the `verify` subcommand.
"""

from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..discrete.cell import *
from ..discrete.darcy import *
from ..discrete.errors import *
from ..discrete.extension import *
from ..discrete.forcing import *
from ..discrete.geometry import *
from ..discrete.grid import *
from ..discrete.regularity import *
from ..discrete.stokes import *
from .config import *
from .report import *
from .sweep import *

__all__ = [
    "compactness_study",
    "liouville_check",
    "permeability_study",
    "verification_suite",
    "wkp_ratio_study",
]

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-10
ORACLE_SOLVE_TOL = 1e-12
DIVERGENCE_TOL = 1e-8
ORACLE_FORCINGS = 3


def _box_norm(grid: MacGrid, field: Sequence[np.ndarray],
              box: SnappedBox) -> float:
  """||field||_{L2(box)} for a face field."""
  return box_average_l2(grid, field, box) * np.sqrt(box.volume)


def _gradient_norm(grid: MacGrid, field: Sequence[np.ndarray],
                   fluid_faces: Sequence[np.ndarray], box: SnappedBox) -> float:
  g = discrete_gradient_velocity(grid, field, fluid_faces)
  return float(np.sqrt(np.sum(g.squared_norm_cells()[box.slices]) *
                       grid.cell_volume))


def _relative(lhs: float, rhs: float) -> float:
  return lhs / rhs if rhs > 0 else lhs


def compactness_study(config: ExperimentConfig,
                      cell: Optional[CellSolution] = None) -> List[Record]:
  """Errors of the first-order two-scale approximation on Q_inner per eps.

  compactness_u: ||u - mu^-1 W(x/eps)(f - grad p0)||;
  compactness_grad: the same for eps grad;
  compactness_p: ||P_eps - p0|| after removing the mean over Q_inner.
  Each lhs is the error and each rhs the norm of the approximation.
  """
  cell = solve_unit_cell(config) if cell is None else cell
  forcing = config.forcing()
  darcy = solve_homogenized(cell.K, config.mu, forcing, config.darcy_grid())
  unit = config.unit_mask()
  inner = config.sweep["inner_fraction"] * config.extent
  exp_id = config.experiment_id

  def study(epsilon: float) -> List[Record]:
    try:
      state = solve_epsilon(config, epsilon, unit=unit)
    except DarcyLabError as e:
      return [Record.failed(exp_id, epsilon, "compactness_u", e)]
    grid = state.grid
    box = Box.centered(inner).snap(grid)
    approx = first_order_approx(cell, darcy, epsilon, grid, config.mu)
    diff = [np.asarray(u) - a for u, a in zip(state.u, approx)]
    fluid = state.domain.fluid_faces
    err_u = _box_norm(grid, diff, box)
    ref_u = _box_norm(grid, approx, box)
    err_grad = epsilon * _gradient_norm(grid, diff, fluid, box)
    ref_grad = epsilon * _gradient_norm(grid, approx, fluid, box)
    ext = extend_pressure(state, state.domain)
    p0 = interpolate_pressure(darcy, grid)
    d = (ext.values - p0)[box.slices]
    err_p = float(np.sqrt(np.sum((d - d.mean())**2) * grid.cell_volume))
    ref = p0[box.slices]
    ref_p = float(np.sqrt(np.sum((ref - ref.mean())**2) * grid.cell_volume))
    logger.info("compactness eps=%g: err_u=%.4g err_grad=%.4g err_p=%.4g",
                epsilon, err_u, err_grad, err_p)
    return [
        Record.of(exp_id, epsilon,
                  Measurement.of("compactness_u", err_u, ref_u, R=inner)),
        Record.of(exp_id, epsilon,
                  Measurement.of("compactness_grad", err_grad, ref_grad,
                                 R=inner)),
        Record.of(exp_id, epsilon,
                  Measurement.of("compactness_p", err_p, ref_p, R=inner)),
    ]

  tables = map_ordered(study, config.epsilons)
  return [r for t in tables for r in t]


def _lq_norm(values: np.ndarray, q: float, volume: float) -> float:
  return float(np.sum(np.abs(values)**q) * volume)**(1.0 / q)


def wkp_ratio_study(config: ExperimentConfig) -> List[Record]:
  """(eps ||grad u||_q + ||u||_q) / (||F||_q + ||f||_q) on the periodic
  torus surrogate, for the forcing F + eps div f."""
  unit = config.unit_mask()
  forcing = config.forcing()
  matrix = config.matrix_forcing()
  exp_id = config.experiment_id

  def study(epsilon: float) -> List[Record]:
    grid = config.fine_grid(epsilon, PERIODIC)
    F = sample_faces(forcing, grid)
    div = matrix.divergence_faces(grid)
    total = [a + epsilon * b for a, b in zip(F, div)]
    try:
      state = solve_epsilon(config, epsilon, PERIODIC, f=total, unit=unit)
    except DarcyLabError as e:
      return [
          Record.failed(exp_id, epsilon, "wkp", e, q=q)
          for q in config.sweep["wkp_q"]
      ]
    vol = grid.cell_volume
    fluid = state.domain.fluid_cells
    u_mag = cell_magnitude(grid, state.u)
    grad_mag = np.sqrt(np.maximum(state.gradient().squared_norm_cells(), 0.0))
    F_mag = cell_magnitude(grid, F)[fluid]
    f_mag = matrix.magnitude_cells(grid)[fluid]
    records = []
    for q in config.sweep["wkp_q"]:
      lhs = epsilon * _lq_norm(grad_mag, q, vol) + _lq_norm(u_mag, q, vol)
      rhs = _lq_norm(F_mag, q, vol) + _lq_norm(f_mag, q, vol)
      records.append(
          Record.of(exp_id, epsilon, Measurement.of("wkp", lhs, rhs, q=q)))
    logger.info("wkp eps=%g: %d ratios", epsilon, len(records))
    return records

  tables = map_ordered(study, config.epsilons)
  return [r for t in tables for r in t]


def _constant_value(forcing: Forcing) -> np.ndarray:
  if forcing.family == "constant":
    return forcing.value
  return forcing.at_origin()


def liouville_check(config: ExperimentConfig,
                    cell: Optional[CellSolution] = None) -> List[Record]:
  """On the torus a constant forcing c gives u = mu^-1 W(x/eps) c and
  p = eps pi(x/eps) . c exactly; records the relative deviations."""
  cell = solve_unit_cell(config) if cell is None else cell
  unit = config.unit_mask()
  c = _constant_value(config.forcing())
  exp_id = config.experiment_id

  def check(epsilon: float) -> List[Record]:
    grid = config.fine_grid(epsilon, PERIODIC)
    f = [np.full(grid.face_shape(a), c[a]) for a in range(grid.dim)]
    try:
      state = solve_epsilon(config, epsilon, PERIODIC, f=f, unit=unit)
    except DarcyLabError as e:
      return [Record.failed(exp_id, epsilon, "liouville_u", e)]
    tiled = tile_corrector(cell, epsilon, grid)
    expected = [
        sum(c[j] * tiled[j][a] for j in range(grid.dim)) / config.mu
        for a in range(grid.dim)
    ]
    u_err = np.linalg.norm(grid.pack_faces(state.u) - grid.pack_faces(expected))
    u_ref = np.linalg.norm(grid.pack_faces(expected))
    pis = tile_pressure(cell, epsilon, grid)
    fluid = state.domain.fluid_cells
    p_expected = epsilon * sum(c[j] * pis[j] for j in range(grid.dim))
    d = (state.p - p_expected)[fluid]
    p_ref = p_expected[fluid] - p_expected[fluid].mean()
    p_err = np.linalg.norm(d - d.mean())
    return [
        Record(exp_id,
               "liouville_u",
               epsilon=epsilon,
               lhs=float(_relative(u_err, u_ref)),
               rhs=config.tol,
               ratio=float(_relative(u_err, u_ref)) / config.tol),
        Record(exp_id,
               "liouville_p",
               epsilon=epsilon,
               lhs=float(_relative(p_err, np.linalg.norm(p_ref))),
               rhs=config.tol,
               ratio=float(_relative(p_err, np.linalg.norm(p_ref))) /
               config.tol),
    ]

  tables = map_ordered(check, config.epsilons)
  return [r for t in tables for r in t]


def _square_symmetric(mask: np.ndarray) -> bool:
  """Invariant under every axis reflection and axis permutation."""
  for a in range(mask.ndim):
    if not np.array_equal(mask, np.flip(mask, axis=a)):
      return False
  for a in range(mask.ndim):
    for b in range(a + 1, mask.ndim):
      if not np.array_equal(mask, np.swapaxes(mask, a, b)):
        return False
  return True


def permeability_study(config: ExperimentConfig) -> List[Record]:
  """Symmetry, positivity and consistency of K at each cell resolution.

  The `r` column carries the cell mesh size 1/n. K_convergence compares K at
  the coarsest and the finest resolution; it is reported, not gated.
  """
  unit = config.unit_mask()
  symmetric = _square_symmetric(unit)
  exp_id = config.experiment_id
  records = []  # type: List[Record]
  discrepancies = []  # type: List[float]
  tensors = []  # type: List[np.ndarray]
  for res in config.sweep["cell_resolutions"]:
    h = 1.0 / res
    try:
      cell = solve_unit_cell(config, res)
    except DarcyLabError as e:
      records.append(Record.failed(exp_id, None, "K_asymmetry", e, r=h))
      continue
    K, K_avg = cell.K_energy, cell.K_avg
    norm = float(np.linalg.norm(K, 2))
    asym = float(np.max(np.abs(K - K.T)))
    try:
      np.linalg.cholesky(K)
      positive = 1.0
    except np.linalg.LinAlgError:
      positive = 0.0
    disc = float(np.linalg.norm(K_avg - K, 2))
    diag = float(np.max(np.abs(np.diag(K))))
    off = float(np.max(np.abs(K - np.diag(np.diag(K)))))
    discrepancies.append(_relative(disc, norm))
    tensors.append(K)
    records.extend([
        Record(exp_id,
               "K_asymmetry",
               r=h,
               lhs=asym,
               rhs=norm,
               ratio=_relative(asym, norm)),
        Record(exp_id,
               "K_cholesky",
               r=h,
               lhs=positive,
               rhs=1.0,
               ratio=positive),
        Record(exp_id,
               "K_discrepancy",
               r=h,
               lhs=disc,
               rhs=norm,
               ratio=_relative(disc, norm)),
        Record(exp_id,
               "K_offdiagonal",
               r=h,
               lhs=off,
               rhs=diag,
               ratio=_relative(off, diag),
               flag="" if symmetric else "not_symmetric"),
    ])
    logger.info("permeability at n=%d: K=%s", res, K.tolist())
  if len(discrepancies) >= 2:
    first, last = discrepancies[0], discrepancies[-1]
    records.append(
        Record(exp_id,
               "K_refinement",
               lhs=first,
               rhs=last,
               ratio=first / last if last > 0 else float("inf")))
    change = float(np.linalg.norm(tensors[0] - tensors[-1], 2))
    scale = float(np.linalg.norm(tensors[-1], 2))
    records.append(
        Record(exp_id,
               "K_convergence",
               r=1.0 / config.sweep["cell_resolutions"][-1],
               lhs=change,
               rhs=scale,
               ratio=_relative(change, scale)))
  return records


def _verification_domain(config: ExperimentConfig, unit: np.ndarray,
                         epsilon: float) -> PerforatedDomain:
  """(-1/2, 1/2)^d perforated at period eps, one cell per voxel."""
  m = int(round(1.0 / epsilon))
  grid = build_mac_grid(config.dim, unit.shape[0] * m, 0.5, BOX)
  return perforate(unit, epsilon, grid)


def _oracle_records(config: ExperimentConfig, system: SaddleSystem,
                    rng: np.random.Generator) -> Tuple[List[Record],
                                                       List[FlowState]]:
  exp_id = config.experiment_id
  records, states = [], []
  grid = system.grid
  for k in range(ORACLE_FORCINGS):
    f = [rng.standard_normal(s) for s in grid.face_shapes]
    try:
      state = solve(system, f, tol=ORACLE_SOLVE_TOL)
      oracle = solve_dense_oracle(system,
                                  f,
                                  max_dofs=config.solver["oracle_max_dofs"])
    except DarcyLabError as e:
      records.append(Record.failed(exp_id, None, "oracle_u", e, q=k))
      continue
    states.append(state)
    u, uo = grid.pack_faces(state.u), grid.pack_faces(oracle.u)
    p, po = state.p.ravel(), oracle.p.ravel()
    err_u = _relative(float(np.linalg.norm(u - uo)), float(np.linalg.norm(uo)))
    err_p = _relative(float(np.linalg.norm(p - po)), float(np.linalg.norm(po)))
    _, div = residual(system, state)
    records.extend([
        Record(exp_id,
               "oracle_u",
               q=k,
               lhs=err_u,
               rhs=ORACLE_TOL,
               ratio=err_u / ORACLE_TOL),
        Record(exp_id,
               "oracle_p",
               q=k,
               lhs=err_p,
               rhs=ORACLE_TOL,
               ratio=err_p / ORACLE_TOL),
        Record(exp_id,
               "divergence",
               q=k,
               lhs=div,
               rhs=DIVERGENCE_TOL,
               ratio=div / DIVERGENCE_TOL),
    ])
  return records, states


def _witness(config: ExperimentConfig, state: FlowState, cell: CellSolution,
             r: float, fixture: int) -> Record:
  exp_id = config.experiment_id
  try:
    best, lattice = excess_lattice_check(state, cell, r)
  except DarcyLabError as e:
    return Record.failed(exp_id, state.epsilon, "excess_witness", e, q=fixture)
  return Record(exp_id,
                "excess_witness",
                epsilon=state.epsilon,
                r=r,
                q=fixture,
                lhs=best,
                rhs=lattice,
                ratio=_relative(best, lattice))


def verification_suite(config: ExperimentConfig) -> List[Record]:
  """Oracle agreement, permeability, Liouville, the extension mean property
  and the excess lattice witness, as gated records.

  Solver checks run on (-1/2, 1/2)^d at the unit-cell voxel resolution
  (16 x 16 cells for the default 8 voxels per period). The `q` column
  numbers the random forcing or fixture.
  """
  unit = config.unit_mask()
  rng = np.random.default_rng(config.seed)
  exp_id = config.experiment_id
  records = []  # type: List[Record]

  domain = _verification_domain(config, unit, 0.5)
  system = assemble(domain, mu=config.mu, inner=config.inner)
  oracle, states = _oracle_records(config, system, rng)
  records.extend(oracle)

  records.extend(permeability_study(config))
  cell = solve_unit_cell(config)
  records.extend(liouville_check(config, cell))

  for epsilon in config.epsilons:
    grid = config.fine_grid(epsilon)
    fine = perforate(unit, epsilon, grid)
    p = np.where(fine.fluid_cells, rng.standard_normal(grid.cell_shape), 0.0)
    ext = extend_pressure(p, fine)
    check = check_mean_property(ext, p, fine, config.extent)
    bound = 1e-13 * max(1.0, float(np.max(np.abs(p))))
    records.append(
        Record(exp_id,
               "mean_property",
               epsilon=epsilon,
               R=config.extent,
               lhs=check.deviation,
               rhs=bound,
               ratio=check.deviation / bound,
               flag="" if check.asserted else "not_asserted"))

  coarse = solve_cell_problem(unit, unit.shape[0], tol=min(config.tol, 1e-10))
  if states:
    records.append(_witness(config, states[0], coarse, 0.5, 0))
  second = _verification_domain(config, unit, 0.25)
  try:
    f = sample_faces(config.forcing(), second.grid)
    if not any(np.any(c) for c in f):
      f = [rng.standard_normal(s) for s in second.grid.face_shapes]
    state = solve(assemble(second, mu=config.mu, inner=config.inner),
                  f,
                  tol=config.tol)
    records.append(_witness(config, state, coarse, 0.25, 1))
  except DarcyLabError as e:
    records.append(Record.failed(exp_id, 0.25, "excess_witness", e, q=1))
  logger.info("verification: %d records", len(records))
  return records
