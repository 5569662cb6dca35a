"""Unit-cell obstacles, their periodic tiling and the perforated domain
Q_R^eps = Q_R ∩ eps*omega as grid masks.

A unit-cell mask is a boolean array of shape (n,)*d over Y = (0, 1)^d that is
True on solid voxels; voxel i covers (i/n, (i+1)/n) along each axis.

  >>> solid = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
  >>> int(solid.sum()), int((~solid).sum())
  (16, 48)
  >>> margin_cells(solid)
  2
"""

from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import *
from .grid import *

__all__ = [
    "ObstacleSpec",
    "PerforatedDomain",
    "ValidationReport",
    "fluid_components",
    "fluid_faces_from_cells",
    "margin_cells",
    "make_obstacle",
    "perforate",
    "validate",
]

logger = logging.getLogger(__name__)

SHAPES = ("centered-square", "centered-cross", "voxel-list")


class ObstacleSpec:
  """Parameters of a unit-cell obstacle Y_s, in unit-cell coordinates."""

  def __init__(self,
               shape: str,
               side: float = 0.5,
               arm: float = 0.25,
               length: float = 0.75,
               voxels: Optional[Sequence[Sequence[int]]] = None,
               dim: int = 2):
    if shape not in SHAPES:
      raise ConfigurationError(
          f"obstacle shape must be one of {SHAPES} (got {shape!r})",
          key="geometry.shape")
    if shape == "centered-square" and not 0 < side <= 1:
      raise ConfigurationError(f"side must lie in (0, 1] (got {side})",
                               key="geometry.side")
    if shape == "centered-cross":
      if not 0 < arm <= 1:
        raise ConfigurationError(f"arm must lie in (0, 1] (got {arm})",
                                 key="geometry.arm")
      if not 0 < length <= 1:
        raise ConfigurationError(f"length must lie in (0, 1] (got {length})",
                                 key="geometry.length")
    if shape == "voxel-list" and voxels is None:
      raise ConfigurationError("voxel-list obstacle without voxels",
                               key="geometry.voxels")
    self.shape = shape
    self.side = float(side)
    self.arm = float(arm)
    self.length = float(length)
    self.voxels = [tuple(int(i) for i in v) for v in (voxels or [])]
    self.dim = int(dim)
    for v in self.voxels:
      if len(v) != self.dim:
        raise ConfigurationError(
            f"voxel {v} does not have {self.dim} indices",
            key="geometry.voxels")

  @staticmethod
  def parse_voxel_text(text: str, dim: int) -> List[Tuple[int, ...]]:
    """Parses one solid voxel "i j [k]" per line; '#' starts a comment."""
    voxels = []
    for lineno, line in enumerate(text.splitlines(), start=1):
      line = line.split("#", 1)[0].strip()
      if not line:
        continue
      fields = line.split()
      if len(fields) != dim:
        raise ConfigurationError(
            f"line {lineno}: expected {dim} indices, got {line!r}",
            key="geometry.voxel_file")
      try:
        voxels.append(tuple(int(f) for f in fields))
      except ValueError:
        raise ConfigurationError(f"line {lineno}: non-integer index in "
                                 f"{line!r}",
                                 key="geometry.voxel_file") from None
    return voxels

  def contains(self, points: Sequence[np.ndarray]) -> np.ndarray:
    """Membership of points (one coordinate array per axis) in the open shape."""
    offsets = [np.abs(np.asarray(x) - 0.5) for x in points]
    if self.shape == "centered-square":
      inside = np.ones(np.shape(offsets[0]), dtype=bool)
      for o in offsets:
        inside &= o < 0.5 * self.side
      return inside
    if self.shape == "centered-cross":
      inside = np.zeros(np.shape(offsets[0]), dtype=bool)
      for bar_axis in range(self.dim):
        bar = np.ones_like(inside)
        for a, o in enumerate(offsets):
          half = self.length if a == bar_axis else self.arm
          bar &= o < 0.5 * half
        inside |= bar
      return inside
    raise ValueError("voxel-list obstacles have no continuous shape")

  def __repr__(self):
    if self.shape == "centered-square":
      return f"ObstacleSpec(centered-square, side={self.side})"
    if self.shape == "centered-cross":
      return (f"ObstacleSpec(centered-cross, arm={self.arm}, "
              f"length={self.length})")
    return f"ObstacleSpec(voxel-list, {len(self.voxels)} voxels)"


def margin_cells(solid: np.ndarray) -> int:
  """Voxel layers between the obstacle and the unit-cell boundary."""
  n = solid.shape[0]
  if not solid.any():
    return n
  index = np.argwhere(solid)
  return int(np.min(np.minimum(index, n - 1 - index)))


def fluid_components(fluid: np.ndarray, periodic: bool) -> Tuple[int, np.ndarray]:
  """Face-connected components of a boolean cell mask.

  Returns the number of components and a label array that is -1 off the mask.
  """
  fluid = np.asarray(fluid, dtype=bool)
  ids = np.arange(fluid.size).reshape(fluid.shape)
  rows, cols = [], []
  for axis in range(fluid.ndim):
    if periodic:
      nxt_ids = np.roll(ids, -1, axis=axis)
      nxt_fluid = np.roll(fluid, -1, axis=axis)
      both = fluid & nxt_fluid
      rows.append(ids[both])
      cols.append(nxt_ids[both])
    else:
      lo = [slice(None)] * fluid.ndim
      hi = [slice(None)] * fluid.ndim
      lo[axis] = slice(None, -1)
      hi[axis] = slice(1, None)
      both = fluid[tuple(lo)] & fluid[tuple(hi)]
      rows.append(ids[tuple(lo)][both])
      cols.append(ids[tuple(hi)][both])
  r = np.concatenate(rows)
  c = np.concatenate(cols)
  graph = sparse.coo_matrix((np.ones(r.size), (r, c)),
                            shape=(fluid.size, fluid.size))
  _, raw = csgraph.connected_components(graph, directed=False)
  raw = raw.reshape(fluid.shape)
  labels = np.full(fluid.shape, -1, dtype=int)
  if fluid.any():
    _, dense = np.unique(raw[fluid], return_inverse=True)
    labels[fluid] = dense.ravel()
  count = int(labels.max() + 1) if fluid.any() else 0
  return count, labels


class ValidationReport:
  """Standing geometric assumptions, checked at voxel level."""

  def __init__(self, margin_cells: int, margin_ok: bool, connected: bool,
               fluid_fraction: float, lattice_fluid: bool,
               violations: List[str]):
    self.margin_cells = margin_cells
    self.margin_ok = margin_ok
    self.connected = connected
    self.fluid_fraction = fluid_fraction
    self.lattice_fluid = lattice_fluid
    self.violations = violations

  @property
  def ok(self) -> bool:
    return not self.violations

  def __repr__(self):
    return (f"ValidationReport(margin_cells={self.margin_cells}, "
            f"margin_ok={self.margin_ok}, connected={self.connected}, "
            f"fluid_fraction={self.fluid_fraction:.6g}, "
            f"lattice_fluid={self.lattice_fluid}, "
            f"violations={self.violations})")


def _voxelize(spec: ObstacleSpec, n: int) -> np.ndarray:
  shape = (n,) * spec.dim
  if spec.shape == "voxel-list":
    solid = np.zeros(shape, dtype=bool)
    for v in spec.voxels:
      if any(not 0 <= i < n for i in v):
        raise ConfigurationError(f"voxel {v} outside the {n}^{spec.dim} "
                                 f"unit cell",
                                 key="geometry.voxels")
      solid[v] = True
    return solid
  centers = (np.arange(n) + 0.5) / n
  return spec.contains(np.meshgrid(*([centers] * spec.dim), indexing="ij"))


def make_obstacle(spec: ObstacleSpec,
                  n_per_unit: int,
                  check: bool = True,
                  margin_min: int = 1) -> np.ndarray:
  """Voxelizes `spec` at `n_per_unit` voxels per unit length.

  With `check`, raises SeparationViolation when the obstacle comes within
  `margin_min` voxels of the cell boundary and ConnectivityViolation when the
  fluid voxels do not form one periodic component.
  """
  if int(n_per_unit) != n_per_unit or n_per_unit < 2:
    raise ConfigurationError(
        f"unit-cell resolution must be an integer >= 2 (got {n_per_unit})",
        key="geometry.cells_per_period")
  solid = _voxelize(spec, int(n_per_unit))
  if check:
    report = validate(solid, margin_min=margin_min)
    if not report.margin_ok:
      raise SeparationViolation(
          f"{spec} at n={n_per_unit} is {report.margin_cells} voxels from "
          f"the cell boundary (need {margin_min})",
          key="geometry")
    if not report.connected:
      raise ConnectivityViolation(
          f"{spec} at n={n_per_unit} disconnects the fluid", key="geometry")
  solid.flags.writeable = False
  return solid


class PerforatedDomain:
  """Q_R ∩ eps*omega on a MacGrid.

  `fluid_cells` is the tiled fluid mask; `fluid_faces[a]` marks the
  component-a faces with fluid on both sides (all other velocities vanish).
  `local_voxel[a]` maps grid index i along any axis to its unit-cell voxel.
  """

  def __init__(self, grid: MacGrid, solid_unit: np.ndarray, epsilon: float,
               period_cells: int, fluid_cells: np.ndarray,
               fluid_faces: List[np.ndarray]):
    self.grid = grid
    self.solid_unit = solid_unit
    self.epsilon = epsilon
    self.period_cells = period_cells
    self.fluid_cells = fluid_cells
    self.fluid_faces = fluid_faces
    for a in [self.fluid_cells] + list(self.fluid_faces):
      a.flags.writeable = False

  @property
  def periods(self) -> int:
    """m = 1/eps."""
    return int(round(1.0 / self.epsilon))

  @property
  def unit_resolution(self) -> int:
    return self.solid_unit.shape[0]

  @property
  def refine(self) -> int:
    return self.period_cells // self.unit_resolution

  @property
  def has_obstacle(self) -> bool:
    return bool(self.solid_unit.any())

  def local_index(self) -> np.ndarray:
    """Per-axis position of each grid cell inside its period (0..P-1)."""
    return (np.arange(self.grid.cells_per_axis) -
            self.grid.half_cells) % self.period_cells

  def copy_index(self) -> np.ndarray:
    """Per-axis lattice coordinate z of each grid cell, cell in eps(Y + z)."""
    return np.floor_divide(
        np.arange(self.grid.cells_per_axis) - self.grid.half_cells,
        self.period_cells)

  def fluid_face_vector(self) -> np.ndarray:
    return np.concatenate([f.ravel() for f in self.fluid_faces])

  @property
  def fluid_fraction(self) -> float:
    return float(np.count_nonzero(self.fluid_cells)) / self.grid.num_cells

  def __repr__(self):
    return (f"PerforatedDomain({self.grid}, epsilon=1/{self.periods}, "
            f"period_cells={self.period_cells}, "
            f"fluid_cells={int(np.count_nonzero(self.fluid_cells))})")


def fluid_faces_from_cells(grid: MacGrid,
                           fluid_cells: np.ndarray) -> List[np.ndarray]:
  """Faces both of whose cells are fluid; box boundary faces are closed."""
  faces = []
  for a in range(grid.dim):
    if grid.periodic:
      faces.append(fluid_cells & np.roll(fluid_cells, 1, axis=a))
      continue
    f = np.zeros(grid.face_shape(a), dtype=bool)
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    inner = [slice(None)] * grid.dim
    lo[a] = slice(None, -1)
    hi[a] = slice(1, None)
    inner[a] = slice(1, -1)
    f[tuple(inner)] = fluid_cells[tuple(lo)] & fluid_cells[tuple(hi)]
    faces.append(f)
  return faces


def perforate(solid_unit: np.ndarray, epsilon: float,
              grid: MacGrid) -> PerforatedDomain:
  """Tiles the unit-cell obstacle with period eps over the grid.

  The lattice eps*Z^d passes through x = 0, and the grid must resolve each
  period by an integer number of grid cells per voxel.
  """
  solid_unit = np.asarray(solid_unit, dtype=bool)
  if solid_unit.ndim != grid.dim:
    raise ConfigurationError(
        f"unit-cell mask is {solid_unit.ndim}-d but the grid is {grid.dim}-d",
        key="geometry.dim")
  if epsilon <= 0:
    raise ConfigurationError(f"epsilon must be positive (got {epsilon})",
                             key="sweep.epsilons")
  m = int(round(1.0 / epsilon))
  if abs(1.0 / epsilon - m) > 1e-9 * m:
    raise ConfigurationError(
        f"epsilon must be the reciprocal of an integer (got {epsilon})",
        key="sweep.epsilons")
  res = solid_unit.shape[0]
  if grid.n_per_unit % (m * res) != 0:
    raise ConfigurationError(
        f"grid resolution {grid.n_per_unit} is not divisible by "
        f"m * unit resolution = {m} * {res}",
        key="resolution")
  period = grid.n_per_unit // m
  refine = period // res
  if grid.periodic and grid.cells_per_axis % period != 0:
    raise ConfigurationError(
        f"periodic grid of extent {grid.extent} does not hold a whole number "
        f"of periods {epsilon}",
        key="sweep.extent")
  local = (np.arange(grid.cells_per_axis) - grid.half_cells) % period
  voxel = local // refine
  solid = solid_unit[np.ix_(*([voxel] * grid.dim))]
  fluid_cells = ~solid
  fluid_faces = fluid_faces_from_cells(grid, fluid_cells)
  domain = PerforatedDomain(grid, solid_unit.copy(), 1.0 / m, period,
                            fluid_cells, fluid_faces)
  logger.debug("perforated %s", domain)
  return domain


def _lattice_fluid(domain: PerforatedDomain) -> bool:
  """Cells touching a lattice hyperplane eps*Z^d are all fluid."""
  local = domain.local_index()
  touching = (local == 0) | (local == domain.period_cells - 1)
  near = np.zeros(domain.grid.cell_shape, dtype=bool)
  for a in range(domain.grid.dim):
    shape = [1] * domain.grid.dim
    shape[a] = -1
    near |= touching.reshape(shape)
  return bool(np.all(domain.fluid_cells[near]))


def validate(target: Union[PerforatedDomain, np.ndarray],
             margin_min: int = 1) -> ValidationReport:
  """Reports separation margin, connectivity and fluid fraction.

  `target` is a PerforatedDomain or a unit-cell solid mask; nothing raises,
  violations are listed in the report.
  """
  if isinstance(target, PerforatedDomain):
    solid_unit = target.solid_unit
    fluid_fraction = target.fluid_fraction
    lattice_fluid = _lattice_fluid(target)
  else:
    solid_unit = np.asarray(target, dtype=bool)
    fluid_fraction = float(np.count_nonzero(~solid_unit)) / solid_unit.size
    lattice_fluid = margin_cells(solid_unit) >= 1
  margin = margin_cells(solid_unit)
  count, _ = fluid_components(~solid_unit, periodic=True)
  connected = count == 1
  violations = []
  if margin < margin_min:
    violations.append(f"separation margin {margin} < {margin_min} voxels")
  if not connected:
    violations.append(f"fluid has {count} periodic components")
  if not lattice_fluid:
    violations.append("solid cells touch the eps-lattice hyperplanes")
  return ValidationReport(margin, margin >= margin_min, connected,
                          fluid_fraction, lattice_fluid, violations)
