"""Staggered (MAC) grids over Q_R = (-R, R)^d, their discrete calculus and
box quadrature.

Grid construction and counting:
  >>> g = build_mac_grid(2, 8, 1, "box")
  >>> g.cell_shape, g.face_shape(0), g.face_shape(1)
  ((16, 16), (17, 16), (16, 17))
  >>> p = build_mac_grid(2, 8, 1, "periodic")
  >>> p.cell_shape, p.face_shape(0)
  ((16, 16), (16, 16))
  >>> build_mac_grid(2, 5, 0.5, "box")
  Traceback (most recent call last):
  ...
  darcy_lab.discrete.errors.ConfigurationError: extent: extent * n_per_unit must be an integer (got 0.5 * 5)

Arrays use `indexing="ij"` (axis 0 is x). Pressure lives at cell centers,
component a of the velocity on the a-normal faces. On a box grid face k along
axis a sits at x_a = k*h - R (k = 0..N); on a periodic grid face k is the
lower face of cell k (k = 0..N-1).
"""

from typing import List, Optional, Sequence, Tuple, Union
import functools
import math

import numpy as np
from scipy import sparse

from .errors import *

__all__ = [
    "BOX",
    "PERIODIC",
    "Box",
    "CellField",
    "FaceField",
    "MacGrid",
    "SnappedBox",
    "VelocityGradient",
    "box_average",
    "box_average_l2",
    "build_mac_grid",
    "cell_magnitude",
    "discrete_divergence",
    "discrete_gradient_pressure",
    "discrete_gradient_velocity",
    "faces_to_cells",
]

BOX = "box"
PERIODIC = "periodic"
TOPOLOGIES = (BOX, PERIODIC)

# Type aliases.
CellField = np.ndarray
FaceField = List[np.ndarray]

_SNAP_TOL = 1e-9


class MacGrid:
  """Descriptor of a staggered grid covering Q_R = (-R, R)^d.

  Instances are immutable; derived sparse operators are built on first use
  and cached.
  """

  def __init__(self, dim: int, n_per_unit: int, extent: float, topology: str):
    if dim not in (2, 3):
      raise ConfigurationError(f"dimension must be 2 or 3 (got {dim})",
                               key="dim")
    if int(n_per_unit) != n_per_unit or n_per_unit < 4:
      raise ConfigurationError(
          f"n_per_unit must be an integer >= 4 (got {n_per_unit})",
          key="n_per_unit")
    if topology not in TOPOLOGIES:
      raise ConfigurationError(
          f"topology must be one of {TOPOLOGIES} (got {topology!r})",
          key="topology")
    if extent <= 0:
      raise ConfigurationError(f"extent must be positive (got {extent})",
                               key="extent")
    half_cells = extent * n_per_unit
    if abs(half_cells - round(half_cells)) > 1e-9 * max(1.0, half_cells):
      raise ConfigurationError(
          f"extent * n_per_unit must be an integer "
          f"(got {extent} * {n_per_unit})",
          key="extent")
    self.dim = int(dim)
    self.n_per_unit = int(n_per_unit)
    self.extent = float(extent)
    self.topology = topology
    self.h = 1.0 / self.n_per_unit
    self.half_cells = int(round(half_cells))
    self.cells_per_axis = 2 * self.half_cells
    self._divergence = None  # type: Optional[sparse.csr_matrix]

  @property
  def periodic(self) -> bool:
    return self.topology == PERIODIC

  @property
  def cell_shape(self) -> Tuple[int, ...]:
    return (self.cells_per_axis,) * self.dim

  @property
  def num_cells(self) -> int:
    return self.cells_per_axis**self.dim

  @property
  def cell_volume(self) -> float:
    return self.h**self.dim

  def face_shape(self, axis: int) -> Tuple[int, ...]:
    n = self.cells_per_axis
    shape = [n] * self.dim
    if not self.periodic:
      shape[axis] += 1
    return tuple(shape)

  @property
  def face_shapes(self) -> List[Tuple[int, ...]]:
    return [self.face_shape(a) for a in range(self.dim)]

  @property
  def face_counts(self) -> List[int]:
    return [int(np.prod(s)) for s in self.face_shapes]

  @property
  def num_faces(self) -> int:
    return sum(self.face_counts)

  @property
  def face_offsets(self) -> List[int]:
    offsets = [0]
    for count in self.face_counts[:-1]:
      offsets.append(offsets[-1] + count)
    return offsets

  def axis_cell_centers(self) -> np.ndarray:
    return (np.arange(self.cells_per_axis) + 0.5) * self.h - self.extent

  def axis_face_positions(self) -> np.ndarray:
    count = self.cells_per_axis + (0 if self.periodic else 1)
    return np.arange(count) * self.h - self.extent

  def cell_centers(self) -> List[np.ndarray]:
    """Coordinates of the cell centers, one array per axis."""
    c = self.axis_cell_centers()
    return np.meshgrid(*([c] * self.dim), indexing="ij")

  def face_centers(self, axis: int) -> List[np.ndarray]:
    """Coordinates of the component-`axis` velocity nodes."""
    axes = [self.axis_cell_centers()] * self.dim
    axes[axis] = self.axis_face_positions()
    return np.meshgrid(*axes, indexing="ij")

  # Index maps.
  def cell_linear_index(self, index: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(index), self.cell_shape))

  def cell_multi_index(self, linear: int) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(linear, self.cell_shape))

  def face_linear_index(self, axis: int, index: Sequence[int]) -> int:
    return self.face_offsets[axis] + int(
        np.ravel_multi_index(tuple(index), self.face_shape(axis)))

  def face_multi_index(self, linear: int) -> Tuple[int, Tuple[int, ...]]:
    if not 0 <= linear < self.num_faces:
      raise IndexError(f"face index {linear} out of range")
    offsets = self.face_offsets
    axis = max(a for a in range(self.dim) if offsets[a] <= linear)
    local = np.unravel_index(linear - offsets[axis], self.face_shape(axis))
    return axis, tuple(int(i) for i in local)

  # Packing.
  def pack_faces(self, field: Sequence[np.ndarray]) -> np.ndarray:
    self.check_faces(field)
    return np.concatenate([np.asarray(f, dtype=float).ravel() for f in field])

  def unpack_faces(self, vector: np.ndarray) -> FaceField:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (self.num_faces,):
      raise ValueError(f"Expected a packed face vector of length "
                       f"{self.num_faces}, got shape {vector.shape}")
    return [
        vector[o:o + c].reshape(s).copy() for o, c, s in zip(
            self.face_offsets, self.face_counts, self.face_shapes)
    ]

  def zero_faces(self) -> FaceField:
    return [np.zeros(s) for s in self.face_shapes]

  def zero_cells(self) -> CellField:
    return np.zeros(self.cell_shape)

  def check_faces(self, field: Sequence[np.ndarray]):
    shapes = [np.shape(f) for f in field]
    if len(field) != self.dim or shapes != self.face_shapes:
      raise ValueError(f"Face field shapes {shapes} do not match grid "
                       f"{self.face_shapes}")

  def check_cells(self, field: np.ndarray):
    if np.shape(field) != self.cell_shape:
      raise ValueError(f"Cell field shape {np.shape(field)} does not match "
                       f"grid {self.cell_shape}")

  # Operators.
  def _face_to_cell_difference_1d(self) -> sparse.csr_matrix:
    n = self.cells_per_axis
    rows = np.arange(n)
    if self.periodic:
      cols_lo, cols_hi, n_faces = rows, (rows + 1) % n, n
    else:
      cols_lo, cols_hi, n_faces = rows, rows + 1, n + 1
    data = np.concatenate([-np.ones(n), np.ones(n)]) / self.h
    return sparse.csr_matrix(
        (data, (np.concatenate([rows, rows]), np.concatenate([cols_lo,
                                                              cols_hi]))),
        shape=(n, n_faces))

  def divergence_matrix(self) -> sparse.csr_matrix:
    """The divergence D (cells x packed faces); the pressure gradient is -D^T."""
    if self._divergence is None:
      d1 = self._face_to_cell_difference_1d()
      eye = sparse.identity(self.cells_per_axis, format="csr")
      blocks = []
      for a in range(self.dim):
        factors = [d1 if b == a else eye for b in range(self.dim)]
        blocks.append(functools.reduce(sparse.kron, factors))
      self._divergence = sparse.hstack(blocks, format="csr")
    return self._divergence

  def __eq__(self, other):
    return (isinstance(other, MacGrid) and
            (self.dim, self.n_per_unit, self.half_cells, self.topology)
            == (other.dim, other.n_per_unit, other.half_cells, other.topology))

  def __hash__(self):
    return hash((self.dim, self.n_per_unit, self.half_cells, self.topology))

  def __repr__(self):
    return (f"MacGrid(dim={self.dim}, n_per_unit={self.n_per_unit}, "
            f"extent={self.extent}, topology={self.topology})")


def build_mac_grid(dim: int, n_per_unit: int, extent: float,
                   topology: str) -> MacGrid:
  return MacGrid(dim, n_per_unit, extent, topology)


def discrete_divergence(grid: MacGrid, u: Sequence[np.ndarray]) -> CellField:
  """Per cell, the sum of outward face fluxes divided by h."""
  return (grid.divergence_matrix() @ grid.pack_faces(u)).reshape(
      grid.cell_shape)


def discrete_gradient_pressure(grid: MacGrid, p: np.ndarray) -> FaceField:
  """The negative adjoint of `discrete_divergence` (zero ghost pressure)."""
  grid.check_cells(p)
  return grid.unpack_faces(-(grid.divergence_matrix().T @ np.ravel(p)))


def faces_to_cells(grid: MacGrid, u: Sequence[np.ndarray]) -> List[np.ndarray]:
  """Averages each velocity component from its two faces to the cell center."""
  grid.check_faces(u)
  cells = []
  for a, f in enumerate(u):
    f = np.asarray(f, dtype=float)
    if grid.periodic:
      cells.append(0.5 * (f + np.roll(f, -1, axis=a)))
    else:
      lo = [slice(None)] * grid.dim
      hi = [slice(None)] * grid.dim
      lo[a] = slice(None, -1)
      hi[a] = slice(1, None)
      cells.append(0.5 * (f[tuple(lo)] + f[tuple(hi)]))
  return cells


def cell_magnitude(grid: MacGrid,
                   field: Union[np.ndarray, Sequence[np.ndarray]],
                   location: str = "faces") -> CellField:
  """|v| per cell for a scalar cell field, a cell vector field or a face field.

  Scalar ndarrays are always cell fields; for sequences `location` says
  whether the components live on faces (averaged to cells first) or cells.
  """
  if isinstance(field, np.ndarray) and field.shape == grid.cell_shape:
    return np.abs(field)
  if location == "faces":
    components = faces_to_cells(grid, field)
  elif location == "cells":
    components = [np.asarray(c, dtype=float) for c in field]
    for c in components:
      grid.check_cells(c)
  else:
    raise ValueError(f"location must be 'faces' or 'cells' (got {location!r})")
  return np.sqrt(sum(c * c for c in components))


class VelocityGradient:
  """Discrete gradient of a face velocity field, stored on "legs".

  A leg joins two neighbouring component-a faces along axis b; its value is
  the difference quotient. With a fluid mask, a fluid face whose tangential
  neighbour is missing (solid, closure or off-grid) gets a no-slip half leg
  of value -2u/h and weight 1/2 instead, which is the ghost reflection of the
  momentum stencil. Hence sum(weight * value**2) equals u^T(-Lap_h)u.
  """

  def __init__(self, grid: MacGrid, u: Sequence[np.ndarray],
               fluid_faces: Optional[Sequence[np.ndarray]]):
    grid.check_faces(u)
    self.grid = grid
    self.masked = fluid_faces is not None
    h = grid.h
    # legs[a][b], leg_weights[a][b], lower[a][b], upper[a][b].
    self.legs = []  # type: List[List[np.ndarray]]
    self.leg_weights = []  # type: List[List[np.ndarray]]
    self.lower = []  # type: List[List[Optional[np.ndarray]]]
    self.upper = []  # type: List[List[Optional[np.ndarray]]]
    for a in range(grid.dim):
      ua = np.asarray(u[a], dtype=float)
      if fluid_faces is not None:
        fa = np.asarray(fluid_faces[a], dtype=bool)
        ua = np.where(fa, ua, 0.0)
      legs_a, weights_a, lower_a, upper_a = [], [], [], []
      for b in range(grid.dim):
        if grid.periodic:
          nxt = np.roll(ua, -1, axis=b)
          legs = (nxt - ua) / h
        else:
          legs = np.diff(ua, axis=b) / h
        weights = np.ones_like(legs)
        lower = upper = None
        if fluid_faces is not None and b != a:
          if grid.periodic:
            f_nxt = np.roll(fa, -1, axis=b)
            f_cur = fa
          else:
            f_cur = _take(fa, b, slice(None, -1))
            f_nxt = _take(fa, b, slice(1, None))
          weights = (f_cur & f_nxt).astype(float)
          legs = legs * weights
          # Missing neighbours of fluid faces.
          if grid.periodic:
            has_lower = np.roll(fa, 1, axis=b)
            has_upper = np.roll(fa, -1, axis=b)
          else:
            has_lower = np.zeros_like(fa)
            has_upper = np.zeros_like(fa)
            _put(has_lower, b, slice(1, None), _take(fa, b, slice(None, -1)))
            _put(has_upper, b, slice(None, -1), _take(fa, b, slice(1, None)))
          lower = np.where(fa & ~has_lower, -2.0 * ua / h, 0.0)
          upper = np.where(fa & ~has_upper, -2.0 * ua / h, 0.0)
        legs_a.append(legs)
        weights_a.append(weights)
        lower_a.append(lower)
        upper_a.append(upper)
      self.legs.append(legs_a)
      self.leg_weights.append(weights_a)
      self.lower.append(lower_a)
      self.upper.append(upper_a)

  def scaled(self, factor: float) -> "VelocityGradient":
    out = object.__new__(VelocityGradient)
    out.grid = self.grid
    out.masked = self.masked
    out.leg_weights = self.leg_weights
    out.legs = [[l * factor for l in row] for row in self.legs]
    out.lower = [[None if l is None else l * factor for l in row]
                 for row in self.lower]
    out.upper = [[None if l is None else l * factor for l in row]
                 for row in self.upper]
    return out

  def energy(self) -> float:
    """sum over legs of weight * value**2 (multiply by h^d for the integral)."""
    return float(np.sum(self.inner_cells(self)))

  def inner_cells(self, other: "VelocityGradient") -> CellField:
    """Cell density of <grad u, grad v>, conserving the leg sum exactly."""
    grid = self.grid
    total = grid.zero_cells()
    for a in range(grid.dim):
      face_energy = np.zeros(grid.face_shape(a))
      for b in range(grid.dim):
        prod = self.leg_weights[a][b] * (self.legs[a][b] * other.legs[a][b])
        if b == a:
          # Normal leg k joins faces k and k+1 of cell k in both topologies.
          total += prod
          continue
        if grid.periodic:
          face_energy += 0.5 * prod + 0.5 * np.roll(prod, 1, axis=b)
        else:
          _add(face_energy, b, slice(None, -1), 0.5 * prod)
          _add(face_energy, b, slice(1, None), 0.5 * prod)
        if self.lower[a][b] is not None and other.lower[a][b] is not None:
          face_energy += 0.5 * (self.lower[a][b] * other.lower[a][b])
          face_energy += 0.5 * (self.upper[a][b] * other.upper[a][b])
      total += _faces_to_cells_split(grid, a, face_energy)
    return total

  def squared_norm_cells(self) -> CellField:
    return self.inner_cells(self)


def _take(a: np.ndarray, axis: int, s: slice) -> np.ndarray:
  index = [slice(None)] * a.ndim
  index[axis] = s
  return a[tuple(index)]


def _put(a: np.ndarray, axis: int, s: slice, value: np.ndarray):
  index = [slice(None)] * a.ndim
  index[axis] = s
  a[tuple(index)] = value


def _add(a: np.ndarray, axis: int, s: slice, value: np.ndarray):
  index = [slice(None)] * a.ndim
  index[axis] = s
  a[tuple(index)] += value


def _faces_to_cells_split(grid: MacGrid, axis: int,
                          face_values: np.ndarray) -> np.ndarray:
  if grid.periodic:
    return 0.5 * (face_values + np.roll(face_values, -1, axis=axis))
  cells = 0.5 * (_take(face_values, axis, slice(None, -1)) +
                 _take(face_values, axis, slice(1, None)))
  # Boundary faces have a single neighbouring cell.
  _add(cells, axis, slice(0, 1), 0.5 * _take(face_values, axis, slice(0, 1)))
  _add(cells, axis, slice(-1, None),
       0.5 * _take(face_values, axis, slice(-1, None)))
  return cells


def discrete_gradient_velocity(
    grid: MacGrid,
    u: Sequence[np.ndarray],
    fluid_faces: Optional[Sequence[np.ndarray]] = None) -> VelocityGradient:
  return VelocityGradient(grid, u, fluid_faces)


class SnappedBox:
  """A grid-aligned box: per axis the half-open cell index range [lo, hi)."""

  def __init__(self, grid: MacGrid, lo: Sequence[int], hi: Sequence[int]):
    self.grid = grid
    self.lo = tuple(int(i) for i in lo)
    self.hi = tuple(int(i) for i in hi)

  @property
  def slices(self) -> Tuple[slice, ...]:
    return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))

  @property
  def cell_count(self) -> int:
    return int(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

  @property
  def volume(self) -> float:
    return self.cell_count * self.grid.cell_volume

  def mask(self) -> np.ndarray:
    m = np.zeros(self.grid.cell_shape, dtype=bool)
    m[self.slices] = True
    return m

  def __repr__(self):
    return f"SnappedBox(lo={self.lo}, hi={self.hi})"


class Box:
  """Q(x, r) = x + (-r, r)^d."""

  def __init__(self, center: Union[float, Sequence[float]], half_width: float):
    if half_width <= 0:
      raise ValueError(f"Box half_width must be positive (got {half_width})")
    self.center = center
    self.half_width = float(half_width)

  @classmethod
  def centered(cls, half_width: float) -> "Box":
    return cls(0.0, half_width)

  def snap(self, grid: MacGrid) -> SnappedBox:
    """Snaps center and half-width outward to the enclosing cell boundaries."""
    center = np.broadcast_to(np.asarray(self.center, dtype=float), (grid.dim,))
    lo, hi = [], []
    for c in center:
      lo.append(
          math.floor((c - self.half_width + grid.extent) / grid.h + _SNAP_TOL))
      hi.append(
          math.ceil((c + self.half_width + grid.extent) / grid.h - _SNAP_TOL))
    n = grid.cells_per_axis
    if any(l < 0 for l in lo) or any(h > n for h in hi):
      raise DomainTooSmall(f"{self} leaves the grid covering "
                           f"Q_{grid.extent}")
    if any(h <= l for l, h in zip(lo, hi)):
      raise DomainTooSmall(f"{self} is empty after snapping")
    return SnappedBox(grid, lo, hi)

  def __repr__(self):
    return f"Box(center={self.center}, half_width={self.half_width})"


def _as_snapped(grid: MacGrid, box: Union[Box, SnappedBox]) -> SnappedBox:
  return box if isinstance(box, SnappedBox) else box.snap(grid)


def box_average(grid: MacGrid,
                density: np.ndarray,
                box: Union[Box, SnappedBox],
                where: Optional[np.ndarray] = None) -> float:
  """Midpoint-rule mean of a cell density over a box (optionally a subset)."""
  grid.check_cells(density)
  snapped = _as_snapped(grid, box)
  values = density[snapped.slices]
  if where is None:
    return float(np.mean(values))
  selected = np.asarray(where, dtype=bool)[snapped.slices]
  count = int(np.count_nonzero(selected))
  if count == 0:
    raise DomainTooSmall(f"{snapped} contains no selected cells")
  return float(np.sum(values[selected]) / count)


def box_average_l2(grid: MacGrid,
                   field: Union[np.ndarray, Sequence[np.ndarray]],
                   box: Union[Box, SnappedBox],
                   q: float = 2.0,
                   location: str = "faces") -> float:
  """(sum |v_c|^q h^d / |box|)^(1/q) over the cells of the snapped box.

  Cells outside the fluid carry zero values (extension by zero).
  """
  if q <= 0:
    raise ValueError(f"exponent must be positive (got {q})")
  magnitude = cell_magnitude(grid, field, location)
  return box_average(grid, magnitude**q, box)**(1.0 / q)
