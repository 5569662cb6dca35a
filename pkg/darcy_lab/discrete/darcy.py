"""The homogenized Darcy problem and the first-order two-scale approximation.

On a box grid over Q the pressure p0 solves

  div(K (f - grad p0)) = 0 in Q,   K (f - grad p0) . e_a = g on the a-faces of dQ

with a conservative face-flux scheme. For a full tensor the flux on an
a-face is F_a = sum_b K_ab A_ab (f_b - d_b p0), where A_aa is the identity
and A_ab averages the four surrounding b-face values. Since A_ab^T = A_ba,
the assembled operator is symmetric.
"""

from typing import List, Optional, Sequence, Union
import functools
import logging

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from .errors import *
from .cell import *
from .forcing import *
from .grid import *
from .krylov import *

__all__ = [
    "DarcySolution",
    "darcy_operator",
    "darcy_velocity",
    "first_order_approx",
    "interpolate_gradient",
    "interpolate_pressure",
    "solve_homogenized",
]

logger = logging.getLogger(__name__)


def _cell_to_face_average_1d(n: int) -> sparse.csr_matrix:
  rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
  cols = np.concatenate([np.arange(n), np.arange(n)])
  return sparse.csr_matrix((np.full(2 * n, 0.5), (rows, cols)),
                           shape=(n + 1, n))


def _averaging(grid: MacGrid, a: int, b: int) -> sparse.csr_matrix:
  """b-faces -> a-faces, averaging the four b-faces around each a-face."""
  n = grid.cells_per_axis
  c2f = _cell_to_face_average_1d(n)
  eye = sparse.identity(n, format="csr")
  factors = []
  for axis in range(grid.dim):
    if axis == a:
      factors.append(c2f)
    elif axis == b:
      factors.append(c2f.T.tocsr())
    else:
      factors.append(eye)
  return functools.reduce(sparse.kron, factors).tocsr()


def _interior_faces(grid: MacGrid) -> np.ndarray:
  masks = []
  for a in range(grid.dim):
    m = np.ones(grid.face_shape(a), dtype=bool)
    index = [slice(None)] * grid.dim
    index[a] = 0
    m[tuple(index)] = False
    index[a] = -1
    m[tuple(index)] = False
    masks.append(m.ravel())
  return np.concatenate(masks)


def _tensor_blocks(K: np.ndarray, grid: MacGrid) -> sparse.csr_matrix:
  """The face operator [K_ab A_ab] restricted to interior faces."""
  d = grid.dim
  blocks = [[None] * d for _ in range(d)]
  for a in range(d):
    for b in range(d):
      if a == b:
        blocks[a][b] = K[a, a] * sparse.identity(grid.face_counts[a],
                                                 format="csr")
      elif K[a, b] != 0.0:
        blocks[a][b] = K[a, b] * _averaging(grid, a, b)
      else:
        blocks[a][b] = sparse.csr_matrix((grid.face_counts[a],
                                          grid.face_counts[b]))
  P = sparse.diags(_interior_faces(grid).astype(float))
  return (P @ sparse.bmat(blocks, format="csr") @ P).tocsr()


def darcy_operator(K: np.ndarray, grid: MacGrid) -> sparse.csr_matrix:
  """L = G^T K_A G with G the gradient onto interior faces."""
  K = _check_permeability(K, grid.dim)
  G = _gradient(grid)
  return (G.T @ _tensor_blocks(K, grid) @ G).tocsr()


def _gradient(grid: MacGrid) -> sparse.csr_matrix:
  P = sparse.diags(_interior_faces(grid).astype(float))
  return (P @ (-grid.divergence_matrix().T)).tocsr()


def _check_permeability(K, dim: int) -> np.ndarray:
  K = np.asarray(K, dtype=float)
  if K.shape != (dim, dim):
    raise ConfigurationError(f"K must be {dim}x{dim} (got {K.shape})",
                             key="K")
  if not np.allclose(K, K.T, rtol=1e-10, atol=1e-14):
    raise ConfigurationError("K must be symmetric", key="K")
  try:
    np.linalg.cholesky(0.5 * (K + K.T))
  except np.linalg.LinAlgError:
    raise ConfigurationError("K must be positive definite", key="K") from None
  return 0.5 * (K + K.T)


class DarcySolution:
  """p0 (zero mean) on the cells of a box grid, with the data it solves."""

  def __init__(self, grid: MacGrid, K: np.ndarray, mu: float, p0: np.ndarray,
               f_faces: FaceField, f_cells: List[np.ndarray],
               flux: FaceField, forcing: Optional[Forcing],
               iterations: int):
    self.grid = grid
    self.K = K
    self.mu = mu
    self.p0 = p0
    self.f_faces = f_faces
    self.f_cells = f_cells
    self.flux = flux
    self.forcing = forcing
    self.iterations = iterations
    self.grad_p0 = list(np.gradient(p0, grid.h, edge_order=2))
    self.ubar = darcy_velocity(self)
    for a in [p0] + list(f_faces) + list(f_cells) + list(flux) + list(
        self.grad_p0):
      a.flags.writeable = False

  def flux_divergence(self) -> np.ndarray:
    return discrete_divergence(self.grid, self.flux)

  def __repr__(self):
    return (f"DarcySolution({self.grid}, iterations={self.iterations}, "
            f"|p0|_max={float(np.max(np.abs(self.p0))):.6g})")


def solve_homogenized(K: np.ndarray,
                      mu: float,
                      f: Union[Forcing, Sequence[np.ndarray]],
                      grid: MacGrid,
                      g: Optional[Sequence[np.ndarray]] = None,
                      tol: float = 1e-10,
                      max_iter: Optional[int] = None) -> DarcySolution:
  """Solves for p0 by projected CG; `g` is a face field of boundary fluxes
  (only the boundary faces are read, default no-flux)."""
  if grid.periodic:
    raise ConfigurationError("the Darcy problem is posed on a box grid",
                             key="topology")
  K = _check_permeability(K, grid.dim)
  if isinstance(f, Forcing):
    forcing = f  # type: Optional[Forcing]
    f_faces = sample_faces(f, grid)
    f_cells = sample_cells(f, grid)
  else:
    forcing = None
    f_faces = [np.array(c, dtype=float) for c in f]
    f_cells = faces_to_cells(grid, f_faces)
  interior = _interior_faces(grid)
  gvec = np.zeros(grid.num_faces)
  if g is not None:
    gvec = np.where(interior, 0.0, grid.pack_faces(g))
  D = grid.divergence_matrix()
  source = D @ gvec
  total = float(np.sum(source)) * grid.h
  if abs(total) > 1e-12 * max(1.0, float(np.sum(np.abs(gvec)))):
    raise IncompatibleData(f"boundary flux data integrate to {total} != 0")
  G = _gradient(grid)
  KA = _tensor_blocks(K, grid)
  L = (G.T @ KA @ G).tocsr()
  fvec = np.where(interior, grid.pack_faces(f_faces), 0.0)
  rhs = G.T @ (KA @ fvec) - source
  project = component_mean_projector(np.zeros(grid.num_cells, dtype=int))
  p, info = projected_cg(lambda x: L @ x,
                         rhs,
                         project=project,
                         tol=tol,
                         max_iter=max_iter,
                         what="darcy cg")
  flux_int = KA @ (fvec - G @ p)
  flux = grid.unpack_faces(np.where(interior, flux_int, gvec))
  solution = DarcySolution(grid, K, float(mu), p.reshape(grid.cell_shape),
                           f_faces, f_cells, flux, forcing, info.iterations)
  logger.debug("darcy solve: %s", solution)
  return solution


def darcy_velocity(darcy: DarcySolution) -> List[np.ndarray]:
  """ubar = mu^-1 K (f - grad p0) at the cell centers."""
  d = darcy.grid.dim
  drive = [darcy.f_cells[j] - darcy.grad_p0[j] for j in range(d)]
  return [
      sum(darcy.K[i, j] * drive[j] for j in range(d)) / darcy.mu
      for i in range(d)
  ]


def _interpolator(darcy: DarcySolution,
                  values: np.ndarray) -> RegularGridInterpolator:
  axis = darcy.grid.axis_cell_centers()
  return RegularGridInterpolator((axis,) * darcy.grid.dim,
                                 values,
                                 method="linear",
                                 bounds_error=False,
                                 fill_value=None)


def _check_fine(darcy: DarcySolution, grid: MacGrid):
  if abs(grid.extent - darcy.grid.extent) > 1e-12 or grid.dim != darcy.grid.dim:
    raise ConfigurationError(
        f"{grid} does not cover the Darcy grid {darcy.grid}", key="resolution")


def interpolate_gradient(darcy: DarcySolution,
                         points: Sequence[np.ndarray]) -> List[np.ndarray]:
  """Components of grad p0 at arbitrary points (one array per axis)."""
  stacked = np.stack([np.asarray(x, dtype=float) for x in points], axis=-1)
  return [_interpolator(darcy, g)(stacked) for g in darcy.grad_p0]


def interpolate_pressure(darcy: DarcySolution, grid: MacGrid) -> np.ndarray:
  """p0 at the cell centers of a fine grid over the same Q."""
  _check_fine(darcy, grid)
  stacked = np.stack(grid.cell_centers(), axis=-1)
  return _interpolator(darcy, darcy.p0)(stacked)


def first_order_approx(cell: CellSolution,
                       darcy: DarcySolution,
                       epsilon: float,
                       grid: MacGrid,
                       mu: Optional[float] = None,
                       tiled: Optional[List[FaceField]] = None) -> FaceField:
  """mu^-1 sum_j W_j(x/eps) (f_j - d_j p0) on the faces of the fine grid.

  `tiled` may carry a precomputed tile_corrector(cell, epsilon, grid). The
  forcing is evaluated exactly when the Darcy solution carries an analytic
  one, and interpolated otherwise.
  """
  _check_fine(darcy, grid)
  mu = darcy.mu if mu is None else mu
  if tiled is None:
    tiled = tile_corrector(cell, epsilon, grid)
  d = grid.dim
  out = []
  for a in range(d):
    points = grid.face_centers(a)
    grad = interpolate_gradient(darcy, points)
    if darcy.forcing is not None:
      f = darcy.forcing.evaluate(points)
    else:
      stacked = np.stack(points, axis=-1)
      f = [_interpolator(darcy, c)(stacked) for c in darcy.f_cells]
    out.append(sum(tiled[j][a] * (f[j] - grad[j]) for j in range(d)) / mu)
  return out
