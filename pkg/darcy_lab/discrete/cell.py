"""The unit-cell corrector problem and the permeability matrix.

For each unit vector e_j the 1-periodic problem

  -Lap W_j + grad pi_j = e_j in Y_f,  div W_j = 0,  W_j = 0 on Y_s

is solved on a periodic MAC grid over the unit cell. All arrays of a
CellSolution are stored in voxel coordinates: index 0 along an axis is the
voxel (0, 1/n), and face 0 is its lower face.
"""

from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from .errors import *
from .geometry import *
from .grid import *
from .stokes import *

__all__ = [
    "CellSolution",
    "GramSystem",
    "gram_matrix",
    "permeability",
    "permeability_average",
    "permeability_energy",
    "solve_cell_problem",
    "tile_cells",
    "tile_corrector",
    "tile_pressure",
]

logger = logging.getLogger(__name__)

PERMEABILITY_METHODS = ("average", "energy")


def permeability_average(W: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
  """K[i][j] = integral over Y of W_j^i (zero extended)."""
  dim = len(W)
  K = np.zeros((dim, dim))
  for j in range(dim):
    for i in range(dim):
      K[i, j] = float(np.mean(W[j][i]))
  return K


def permeability_energy(grid: MacGrid, W: Sequence[Sequence[np.ndarray]],
                        fluid_faces: Sequence[np.ndarray]) -> np.ndarray:
  """K[i][j] = sum_l <grad W_j^l, grad W_i^l> h^d over the leg quadrature.

  Leg products are formed elementwise so K is bitwise symmetric.
  """
  dim = len(W)
  grads = [discrete_gradient_velocity(grid, w, fluid_faces) for w in W]
  K = np.zeros((dim, dim))
  for i in range(dim):
    for j in range(dim):
      K[i, j] = float(np.sum(grads[j].inner_cells(grads[i]))) * grid.cell_volume
  return K


class CellSolution:
  """Correctors W_j (face fields), pressures pi_j and both permeabilities."""

  def __init__(self, solid_unit: np.ndarray, resolution: int,
               W: List[FaceField], pi: List[np.ndarray],
               iterations: Optional[List[int]] = None):
    self.solid_unit = solid_unit
    self.resolution = resolution
    self.dim = solid_unit.ndim
    self.grid = build_mac_grid(self.dim, resolution, 0.5, PERIODIC)
    fluid_cells = ~_refine_mask(solid_unit, resolution)
    self.fluid_cells = fluid_cells
    self.fluid_faces = [
        fluid_cells & np.roll(fluid_cells, 1, axis=a) for a in range(self.dim)
    ]
    self.W = W
    self.pi = pi
    self.iterations = iterations or []
    self.K_avg = permeability_average(W)
    self.K_energy = permeability_energy(self.grid, W, self.fluid_faces)
    for a in [self.fluid_cells] + self.fluid_faces + list(pi) + [
        c for w in W for c in w
    ]:
      a.flags.writeable = False

  @property
  def K(self) -> np.ndarray:
    return self.K_energy

  def __repr__(self):
    return (f"CellSolution(resolution={self.resolution}, "
            f"K={np.array2string(self.K_energy, precision=6)})")


def _refine_mask(solid_unit: np.ndarray, resolution: int) -> np.ndarray:
  res = solid_unit.shape[0]
  if resolution % res != 0:
    raise ConfigurationError(
        f"cell resolution {resolution} is not a multiple of the unit-cell "
        f"mask resolution {res}",
        key="geometry.refine")
  voxel = np.arange(resolution) // (resolution // res)
  return solid_unit[np.ix_(*([voxel] * solid_unit.ndim))]


def solve_cell_problem(solid_unit: np.ndarray,
                       n_per_unit: Optional[int] = None,
                       tol: float = 1e-10,
                       inner: str = "direct") -> CellSolution:
  """Solves the d corrector problems at `n_per_unit` grid cells per unit.

  `n_per_unit` defaults to the mask resolution and must be an even multiple
  of it.
  """
  solid_unit = np.asarray(solid_unit, dtype=bool)
  dim = solid_unit.ndim
  n = solid_unit.shape[0] if n_per_unit is None else int(n_per_unit)
  if not solid_unit.any():
    raise IncompatibleData("the cell problem needs an obstacle: constant "
                           "fields lie in the kernel on an empty torus")
  if n % 2 != 0:
    raise ConfigurationError(f"cell resolution must be even (got {n})",
                             key="geometry.cells_per_period")
  grid = build_mac_grid(dim, n, 0.5, PERIODIC)
  domain = perforate(solid_unit, 1.0, grid)
  system = assemble(domain, mu=1.0, epsilon=1.0, inner=inner)
  shift = -grid.half_cells
  W, pi, iterations = [], [], []
  for j in range(dim):
    f = grid.zero_faces()
    f[j][:] = 1.0
    state = solve(system, f, tol=tol)
    axes = tuple(range(dim))
    W.append([np.roll(c, (shift,) * dim, axis=axes) for c in state.u])
    pi.append(np.roll(state.p, (shift,) * dim, axis=axes))
    iterations.append(state.iterations)
  cell = CellSolution(solid_unit.copy(), n, W, pi, iterations)
  logger.info("cell problem at n=%d: K=%s", n, cell.K_energy.tolist())
  return cell


def permeability(cell: CellSolution, method: str = "energy") -> np.ndarray:
  if method == "average":
    return cell.K_avg.copy()
  if method == "energy":
    return cell.K_energy.copy()
  raise ValueError(f"permeability method must be one of "
                   f"{PERMEABILITY_METHODS} (got {method!r})")


def _tiling_index(cell: CellSolution, epsilon: float,
                  grid: MacGrid) -> np.ndarray:
  m = int(round(1.0 / epsilon))
  if abs(1.0 / epsilon - m) > 1e-9 * m:
    raise ConfigurationError(
        f"epsilon must be the reciprocal of an integer (got {epsilon})",
        key="sweep.epsilons")
  if grid.n_per_unit != cell.resolution * m:
    raise ConfigurationError(
        f"grid resolution {grid.n_per_unit} does not tile a cell solution "
        f"of resolution {cell.resolution} with period 1/{m}",
        key="resolution")
  return grid.half_cells


def tile_corrector(cell: CellSolution, epsilon: float,
                   grid: MacGrid) -> List[FaceField]:
  """W_j(x/eps) sampled exactly on the faces of `grid`, one field per j."""
  half = _tiling_index(cell, epsilon, grid)
  P = cell.resolution
  out = []
  for j in range(cell.dim):
    field = []
    for a in range(grid.dim):
      idx = [(np.arange(s) - half) % P for s in grid.face_shape(a)]
      field.append(cell.W[j][a][np.ix_(*idx)])
    out.append(field)
  return out


def tile_cells(cell: CellSolution, epsilon: float, grid: MacGrid,
               values: np.ndarray) -> np.ndarray:
  """A voxel-coordinate cell array sampled at x/eps on the cells of `grid`."""
  half = _tiling_index(cell, epsilon, grid)
  idx = (np.arange(grid.cells_per_axis) - half) % cell.resolution
  return values[np.ix_(*([idx] * grid.dim))]


def tile_pressure(cell: CellSolution, epsilon: float,
                  grid: MacGrid) -> List[np.ndarray]:
  """pi_j(x/eps) on the cells of `grid`, one field per j."""
  return [tile_cells(cell, epsilon, grid, p) for p in cell.pi]


class GramSystem:
  """Least squares of u against the corrector multiples mu^-1 W(x/eps)E.

  Fields are averaged to cells before the products so the minimum agrees
  with `box_average_l2`. Iterating yields (matrix, rhs) for unpacking.
  """

  def __init__(self, grid: MacGrid, snapped: SnappedBox,
               basis: List[List[np.ndarray]]):
    self.grid = grid
    self.box = snapped
    self.basis = basis
    dim = len(basis)
    M = np.zeros((dim, dim))
    for i in range(dim):
      for j in range(dim):
        M[i, j] = _box_dot(snapped, basis[i], basis[j])
    self.matrix = M

  def rhs(self, u: Sequence[np.ndarray]) -> np.ndarray:
    cells = faces_to_cells(self.grid, u)
    return np.array([_box_dot(self.box, cells, w) for w in self.basis])

  def minimize(self, u: Sequence[np.ndarray]) -> np.ndarray:
    try:
      np.linalg.cholesky(self.matrix)
    except np.linalg.LinAlgError:
      raise DomainTooSmall(f"corrector Gram matrix on {self.box} is not "
                           f"positive definite") from None
    return np.linalg.solve(self.matrix, self.rhs(u))

  def remainder(self, u: Sequence[np.ndarray],
                E: np.ndarray) -> List[np.ndarray]:
    """Cell vector field u - mu^-1 W(x/eps)E."""
    cells = faces_to_cells(self.grid, u)
    return [
        c - sum(E[i] * self.basis[i][a] for i in range(len(E)))
        for a, c in enumerate(cells)
    ]

  def __iter__(self) -> Iterator:
    return iter((self.matrix, self.rhs))


def _box_dot(snapped: SnappedBox, v: Sequence[np.ndarray],
             w: Sequence[np.ndarray]) -> float:
  s = snapped.slices
  return float(np.mean(sum(a[s] * b[s] for a, b in zip(v, w))))


def gram_matrix(cell: CellSolution,
                epsilon: float,
                box: Union[Box, SnappedBox],
                mu: float,
                grid: MacGrid,
                tiled: Optional[List[FaceField]] = None) -> GramSystem:
  """M[i][j] = mu^-2 avg_box W_i(x/eps).W_j(x/eps), with b[i] = mu^-1 avg u.W_i."""
  snapped = box if isinstance(box, SnappedBox) else box.snap(grid)
  r = (snapped.hi[0] - snapped.lo[0]) * grid.h / 2.0
  if r < epsilon * (1.0 - 1e-9):
    raise DomainTooSmall(f"box half-width {r} is below the period {epsilon}")
  if tiled is None:
    tiled = tile_corrector(cell, epsilon, grid)
  basis = [[c / mu for c in faces_to_cells(grid, w)] for w in tiled]
  return GramSystem(grid, snapped, basis)
