"""The eps-scaled Stokes system -eps^2 mu Lap u + grad p = f, div u = 0 on a
perforated domain with no-slip on the solid, its Uzawa-CG solver and a dense
KKT oracle.

Unknowns are the fluid faces (velocity) and fluid cells (pressure). With B
the discrete divergence restricted to them, the discrete gradient is -B^T
and the momentum equation reads A u - B^T p = f.
"""

from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import *
from .geometry import *
from .grid import *
from .krylov import *

__all__ = [
    "DIRICHLET",
    "FlowState",
    "SaddleSystem",
    "assemble",
    "energy_balance",
    "pressure_estimate_ratio",
    "residual",
    "solve",
    "solve_dense_oracle",
]

logger = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
OUTER_BCS = (DIRICHLET, PERIODIC)
INNER_SOLVERS = ("direct", "cg")
MEAN_CONSTRAINTS = ("component", "global")


class SaddleSystem:
  """A (fluid faces x fluid faces) and B (fluid cells x fluid faces).

  A = eps^2 mu (-Lap_h) is block diagonal by velocity component; a fluid
  face with a missing tangential neighbour gets the ghost value -u, which
  adds 1/h^2 to its diagonal.
  """

  def __init__(self, domain: PerforatedDomain, mu: float, epsilon: float,
               outer_bc: str, inner: str):
    grid = domain.grid
    self.domain = domain
    self.grid = grid
    self.mu = float(mu)
    self.epsilon = float(epsilon)
    self.outer_bc = outer_bc
    self.inner = inner
    fluid_faces = domain.fluid_face_vector()
    self.face_index = np.flatnonzero(fluid_faces)
    self.cell_index = np.flatnonzero(domain.fluid_cells.ravel())
    self.A = _assemble_laplacian(domain, self.face_index)
    self.A *= self.epsilon**2 * self.mu
    D = grid.divergence_matrix()
    self.B = D[self.cell_index][:, self.face_index].tocsr()
    self.components, labels = fluid_components(domain.fluid_cells,
                                               grid.periodic)
    self.cell_labels = labels.ravel()[self.cell_index]
    self.project_pressure = component_mean_projector(self.cell_labels)
    # The obstacle-free torus leaves constant velocities in the kernel of A.
    self.singular = grid.periodic and not domain.has_obstacle
    face_component = np.concatenate([
        np.full(c, a) for a, c in enumerate(grid.face_counts)
    ])[self.face_index]
    self.face_component = face_component
    self.project_velocity = (component_mean_projector(face_component)
                             if self.singular else identity_projector)
    self._lu = None  # type: Optional[Callable[[np.ndarray], np.ndarray]]

  @property
  def num_velocity(self) -> int:
    return self.face_index.size

  @property
  def num_pressure(self) -> int:
    return self.cell_index.size

  def restrict_faces(self, field: Sequence[np.ndarray]) -> np.ndarray:
    return self.grid.pack_faces(field)[self.face_index]

  def restrict_cells(self, field: np.ndarray) -> np.ndarray:
    return np.ravel(field)[self.cell_index]

  def extend_faces(self, values: np.ndarray) -> FaceField:
    full = np.zeros(self.grid.num_faces)
    full[self.face_index] = values
    return self.grid.unpack_faces(full)

  def extend_cells(self, values: np.ndarray) -> np.ndarray:
    full = np.zeros(self.grid.num_cells)
    full[self.cell_index] = values
    return full.reshape(self.grid.cell_shape)

  def apply_inverse(self, rhs: np.ndarray, tol: float) -> np.ndarray:
    """A^{-1} rhs by sparse LU, or by CG to 0.01 * tol."""
    if self.inner == "direct" and not self.singular:
      if self._lu is None:
        self._lu = splinalg.factorized(self.A.tocsc())
      return self._lu(rhs)
    x, _ = projected_cg(lambda v: self.A @ v,
                        rhs,
                        project=self.project_velocity,
                        tol=0.01 * tol,
                        max_iter=10 * rhs.size,
                        what="inner cg")
    return x

  def __repr__(self):
    return (f"SaddleSystem(velocity_dofs={self.num_velocity}, "
            f"pressure_dofs={self.num_pressure}, "
            f"components={self.components}, outer_bc={self.outer_bc})")


def _assemble_laplacian(domain: PerforatedDomain,
                        face_index: np.ndarray) -> sparse.csr_matrix:
  grid = domain.grid
  h2 = grid.h**2
  dof = np.full(grid.num_faces, -1, dtype=np.int64)
  dof[face_index] = np.arange(face_index.size)
  rows, cols, vals = [], [], []
  for a in range(grid.dim):
    fa = domain.fluid_faces[a]
    ids = dof[grid.face_offsets[a]:grid.face_offsets[a] +
              grid.face_counts[a]].reshape(grid.face_shape(a))
    diag = np.zeros(fa.shape)
    for b in range(grid.dim):
      diag += 2.0 / h2
      if grid.periodic:
        nxt_ids = np.roll(ids, -1, axis=b)
        nxt_fluid = np.roll(fa, -1, axis=b)
        both = fa & nxt_fluid
        left, right = ids[both], nxt_ids[both]
        has_lower = np.roll(fa, 1, axis=b)
        has_upper = nxt_fluid
      else:
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[b] = slice(None, -1)
        hi[b] = slice(1, None)
        both = fa[tuple(lo)] & fa[tuple(hi)]
        left, right = ids[tuple(lo)][both], ids[tuple(hi)][both]
        has_lower = np.zeros_like(fa)
        has_upper = np.zeros_like(fa)
        has_lower[tuple(hi)] = fa[tuple(lo)]
        has_upper[tuple(lo)] = fa[tuple(hi)]
      rows += [left, right]
      cols += [right, left]
      vals += [np.full(left.size, -1.0 / h2)] * 2
      if b != a:
        diag += (~has_lower).astype(float) / h2
        diag += (~has_upper).astype(float) / h2
    rows.append(ids[fa])
    cols.append(ids[fa])
    vals.append(diag[fa])
  n = face_index.size
  return sparse.coo_matrix(
      (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
      shape=(n, n)).tocsr()


def assemble(domain: PerforatedDomain,
             mu: float = 1.0,
             epsilon: Optional[float] = None,
             outer_bc: Optional[str] = None,
             inner: str = "direct") -> SaddleSystem:
  """Builds the saddle-point system; `epsilon` defaults to the domain period."""
  if mu <= 0:
    raise ConfigurationError(f"mu must be positive (got {mu})", key="sweep.mu")
  if inner not in INNER_SOLVERS:
    raise ConfigurationError(
        f"inner solver must be one of {INNER_SOLVERS} (got {inner!r})",
        key="solver.inner")
  expected = PERIODIC if domain.grid.periodic else DIRICHLET
  outer_bc = expected if outer_bc is None else outer_bc
  if outer_bc != expected:
    raise ConfigurationError(
        f"outer boundary condition {outer_bc!r} does not match a "
        f"{domain.grid.topology} grid",
        key="outer_bc")
  system = SaddleSystem(domain, mu,
                        domain.epsilon if epsilon is None else epsilon,
                        outer_bc, inner)
  logger.debug("assembled %s", system)
  return system


class FlowState:
  """Velocity (zero off the fluid faces), pressure (zero off the fluid,
  zero mean per fluid component) and the forcing they solve for."""

  def __init__(self,
               system: SaddleSystem,
               u: FaceField,
               p: np.ndarray,
               f: FaceField,
               iterations: int = 0):
    self.system = system
    self.u = u
    self.p = p
    self.f = f
    self.iterations = iterations
    for a in list(u) + [p] + list(f):
      a.flags.writeable = False

  @property
  def domain(self) -> PerforatedDomain:
    return self.system.domain

  @property
  def grid(self) -> MacGrid:
    return self.system.grid

  @property
  def epsilon(self) -> float:
    return self.system.epsilon

  @property
  def mu(self) -> float:
    return self.system.mu

  def gradient(self) -> VelocityGradient:
    return discrete_gradient_velocity(self.grid, self.u,
                                      self.domain.fluid_faces)

  def __repr__(self):
    return (f"FlowState({self.system}, iterations={self.iterations}, "
            f"|u|={np.linalg.norm(self.grid.pack_faces(self.u)):.6g})")


def _forcing_vector(system: SaddleSystem, f: Sequence[np.ndarray]) -> np.ndarray:
  fvec = system.restrict_faces(f)
  if not np.all(np.isfinite(fvec)):
    raise IncompatibleData("forcing has non-finite values")
  if system.singular:
    means = np.array([
        fvec[system.face_component == a].mean()
        for a in range(system.grid.dim)
    ])
    scale = max(1.0, float(np.max(np.abs(fvec))))
    if np.any(np.abs(means) > 1e-12 * scale):
      raise IncompatibleData(
          f"forcing with mean {means.tolist()} on an obstacle-free torus")
  return fvec


def solve(system: SaddleSystem,
          f: Sequence[np.ndarray],
          tol: float = 1e-8,
          max_iter: Optional[int] = None) -> FlowState:
  """Uzawa conjugate gradients on the pressure Schur complement B A^-1 B^T.

  Stops once ||B u|| <= tol ||u||, or once the Schur residual has dropped by
  a factor tol * 1e-2 (forcings that are pure gradients drive u to zero).
  """
  if tol <= 0:
    raise ConfigurationError(f"tol must be positive (got {tol})",
                             key="solver.tol")
  f = [np.array(c, dtype=float) for c in f]
  fvec = _forcing_vector(system, f)
  if max_iter is None:
    max_iter = 10 * max(1, system.num_pressure)
  B = system.B
  p = np.zeros(system.num_pressure)
  if not np.any(fvec):
    return FlowState(system, system.grid.zero_faces(),
                     system.grid.zero_cells(), f)
  u = system.apply_inverse(fvec, tol)
  r = system.project_pressure(-(B @ u))
  d = r.copy()
  rr = float(r @ r)
  r0 = np.sqrt(rr)
  it = 0
  while True:
    norm_r = np.sqrt(rr)
    if norm_r <= tol * np.linalg.norm(u) or norm_r <= 1e-2 * tol * r0:
      break
    if it >= max_iter:
      raise NonConvergence(it,
                           norm_r / max(np.linalg.norm(u), 1e-300),
                           what="uzawa")
    w = system.apply_inverse(B.T @ d, tol)
    sd = system.project_pressure(B @ w)
    dsd = float(d @ sd)
    if dsd <= 0.0:
      raise NonConvergence(it, norm_r / max(np.linalg.norm(u), 1e-300),
                           what="uzawa")
    alpha = rr / dsd
    p += alpha * d
    u += alpha * w
    r -= alpha * sd
    rr_new = float(r @ r)
    d = r + (rr_new / rr) * d
    rr = rr_new
    it += 1
  p = system.project_pressure(p)
  u = system.project_velocity(system.apply_inverse(fvec + B.T @ p, tol))
  logger.debug("uzawa converged in %d iterations (|Bu|/|u| = %.3e)", it,
               np.linalg.norm(B @ u) / max(np.linalg.norm(u), 1e-300))
  return FlowState(system, system.extend_faces(u), system.extend_cells(p), f,
                   iterations=it)


def residual(system: SaddleSystem,
             state: FlowState,
             f: Optional[Sequence[np.ndarray]] = None) -> Tuple[float, float]:
  """(||A u - B^T p - f|| / ||f||, ||B u|| / ||u||), absolute when f or u is 0."""
  f = state.f if f is None else f
  uvec = system.restrict_faces(state.u)
  pvec = system.restrict_cells(state.p)
  fvec = system.restrict_faces(f)
  momentum = float(np.linalg.norm(system.A @ uvec - system.B.T @ pvec - fvec))
  norm_f = float(np.linalg.norm(fvec))
  if norm_f > 0:
    momentum /= norm_f
  div = float(np.linalg.norm(system.B @ uvec))
  norm_u = float(np.linalg.norm(uvec))
  if norm_u > 0:
    div /= norm_u
  return momentum, div


def _constraint_matrix(system: SaddleSystem,
                       mean_constraint: str) -> sparse.csr_matrix:
  n = system.num_pressure
  if mean_constraint == "component":
    labels = system.cell_labels
    return sparse.csr_matrix((np.ones(n), (np.arange(n), labels)),
                             shape=(n, system.components))
  return sparse.csr_matrix(np.ones((n, 1)))


def solve_dense_oracle(system: SaddleSystem,
                       f: Sequence[np.ndarray],
                       mean_constraint: str = "component",
                       max_dofs: int = 20000) -> FlowState:
  """Direct factorization of the KKT matrix with pressure-mean rows appended.

  With `mean_constraint="global"` a single row pins the overall mean; fluid
  components it cannot pin leave the matrix singular and raise
  SingularSystem.
  """
  if mean_constraint not in MEAN_CONSTRAINTS:
    raise ConfigurationError(
        f"mean_constraint must be one of {MEAN_CONSTRAINTS}",
        key="mean_constraint")
  total = system.num_velocity + system.num_pressure
  if total > max_dofs:
    raise ConfigurationError(
        f"{total} unknowns exceed the oracle limit {max_dofs}",
        key="solver.oracle_max_dofs")
  f = [np.array(c, dtype=float) for c in f]
  fvec = _forcing_vector(system, f)
  C = _constraint_matrix(system, mean_constraint)
  coverage = np.zeros((system.components, C.shape[1]))
  coo = C.tocoo()
  np.add.at(coverage, (system.cell_labels[coo.row], coo.col), 1.0)
  rank = np.linalg.matrix_rank(coverage) if coverage.size else 0
  if rank < system.components:
    raise SingularSystem(
        f"{system.components - rank} fluid component(s) carry no pressure "
        f"mean constraint")
  nu, npr, nc = system.num_velocity, system.num_pressure, C.shape[1]
  blocks = [[system.A, -system.B.T, None], [-system.B, None, C],
            [None, C.T, None]]
  rhs = [fvec, np.zeros(npr), np.zeros(nc)]
  if system.singular:
    E = sparse.csr_matrix(
        (np.ones(nu), (np.arange(nu), system.face_component)),
        shape=(nu, system.grid.dim))
    for row in blocks:
      row.append(None)
    blocks[0][3] = E
    blocks.append([E.T, None, None, None])
    rhs.append(np.zeros(system.grid.dim))
  kkt = sparse.bmat(blocks, format="csc")
  try:
    solution = splinalg.splu(kkt).solve(np.concatenate(rhs))
  except RuntimeError as e:
    raise SingularSystem(f"KKT factorization failed: {e}") from e
  if not np.all(np.isfinite(solution)):
    raise SingularSystem("KKT solve produced non-finite values")
  u = solution[:nu]
  p = system.project_pressure(solution[nu:nu + npr])
  return FlowState(system, system.extend_faces(u), system.extend_cells(p), f)


def energy_balance(system: SaddleSystem,
                   state: FlowState) -> Tuple[float, float]:
  """(eps^2 mu <grad u, grad u>, <f, u>), both weighted by h^d."""
  uvec = system.restrict_faces(state.u)
  fvec = system.restrict_faces(state.f)
  vol = system.grid.cell_volume
  return float(uvec @ (system.A @ uvec)) * vol, float(fvec @ uvec) * vol


def pressure_estimate_ratio(state: FlowState) -> Tuple[float, float]:
  """(||p - mean||_{L2(Q_R^eps)}, R (eps ||grad u||_{L2} + ||f||_{L2}))."""
  grid = state.grid
  vol = grid.cell_volume
  fluid = state.domain.fluid_cells
  p = state.p[fluid]
  lhs = float(np.sqrt(np.sum((p - p.mean())**2) * vol)) if p.size else 0.0
  grad_u = np.sqrt(state.gradient().energy() * vol)
  f_norm = np.sqrt(np.sum(cell_magnitude(grid, state.f)**2) * vol)
  rhs = grid.extent * (state.epsilon * grad_u + f_norm)
  return lhs, float(rhs)
