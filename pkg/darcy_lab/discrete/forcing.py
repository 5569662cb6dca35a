"""Analytic forcing families sampled on MAC grids.

  >>> f = Forcing.constant([1.0, -2.0])
  >>> f.holder_seminorm(0.9, 1.0)
  0.0
  >>> g = Forcing.affine([0.0, 0.0], [[0.0, 1.0], [0.0, 0.0]])
  >>> round(g.holder_seminorm(1.0, 1.0), 12)
  1.0
"""

from typing import Dict, List, Optional, Sequence
import itertools
import math

import numpy as np

from .errors import *
from .grid import *

__all__ = [
    "FAMILIES",
    "Forcing",
    "MatrixForcing",
    "TrigTerm",
    "sample_cells",
    "sample_faces",
]

FAMILIES = ("constant", "affine", "trig")

# Sample points per axis of the grid-dependent Holder surrogate.
_HOLDER_SAMPLES = 64


class TrigTerm:
  """amplitude * sin(pi * wavevector . x + phase)."""

  def __init__(self, amplitude: float, wavevector: Sequence[float],
               phase: float = 0.0):
    self.amplitude = float(amplitude)
    self.wavevector = np.asarray(wavevector, dtype=float)
    self.phase = float(phase)

  def __call__(self, coords: Sequence[np.ndarray]) -> np.ndarray:
    arg = self.phase + sum(
        math.pi * k * np.asarray(x) for k, x in zip(self.wavevector, coords))
    return self.amplitude * np.sin(arg)

  def __repr__(self):
    return (f"TrigTerm({self.amplitude}, {self.wavevector.tolist()}, "
            f"{self.phase})")


class Forcing:
  """A vector forcing f: R^d -> R^d from one of the named families."""

  def __init__(self,
               family: str,
               dim: int,
               value: Optional[Sequence[float]] = None,
               offset: Optional[Sequence[float]] = None,
               matrix: Optional[Sequence[Sequence[float]]] = None,
               terms: Optional[Sequence[Sequence[TrigTerm]]] = None):
    if family not in FAMILIES:
      raise ConfigurationError(
          f"forcing family must be one of {FAMILIES} (got {family!r})",
          key="forcing.family")
    self.family = family
    self.dim = dim
    self.value = np.zeros(dim) if value is None else np.asarray(value, float)
    self.offset = np.zeros(dim) if offset is None else np.asarray(
        offset, float)
    self.matrix = (np.zeros((dim, dim))
                   if matrix is None else np.asarray(matrix, float))
    self.terms = [list(t) for t in terms] if terms else [[] for _ in range(dim)]
    if (self.value.shape != (dim,) or self.offset.shape != (dim,) or
        self.matrix.shape != (dim, dim) or len(self.terms) != dim):
      raise ConfigurationError(f"forcing data do not match dimension {dim}",
                               key="forcing")

  @classmethod
  def constant(cls, value: Sequence[float]) -> "Forcing":
    return cls("constant", len(value), value=value)

  @classmethod
  def affine(cls, offset: Sequence[float],
             matrix: Sequence[Sequence[float]]) -> "Forcing":
    return cls("affine", len(offset), offset=offset, matrix=matrix)

  @classmethod
  def trig(cls, terms: Sequence[Sequence[TrigTerm]]) -> "Forcing":
    return cls("trig", len(terms), terms=terms)

  @classmethod
  def zero(cls, dim: int) -> "Forcing":
    return cls("constant", dim)

  def evaluate(self, coords: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Components of f at points given as one coordinate array per axis."""
    coords = [np.asarray(x, dtype=float) for x in coords]
    shape = np.broadcast(*coords).shape
    if self.family == "constant":
      return [np.full(shape, v) for v in self.value]
    if self.family == "affine":
      return [
          self.offset[a] + sum(self.matrix[a, b] * coords[b]
                               for b in range(self.dim)) + np.zeros(shape)
          for a in range(self.dim)
      ]
    return [
        sum((t(coords) for t in self.terms[a]), np.zeros(shape))
        for a in range(self.dim)
    ]

  def component(self, a: int, coords: Sequence[np.ndarray]) -> np.ndarray:
    return self.evaluate(coords)[a]

  def at_origin(self) -> np.ndarray:
    return np.array([float(c) for c in self.evaluate([0.0] * self.dim)])

  def scaled(self, factor: float) -> "Forcing":
    """factor * f."""
    return Forcing(self.family,
                   self.dim,
                   value=factor * self.value,
                   offset=factor * self.offset,
                   matrix=factor * self.matrix,
                   terms=[[
                       TrigTerm(factor * t.amplitude, t.wavevector, t.phase)
                       for t in row
                   ] for row in self.terms])

  def rescaled(self, r: float) -> "Forcing":
    """g(x) = f(r x)."""
    return Forcing(self.family,
                   self.dim,
                   value=self.value,
                   offset=self.offset,
                   matrix=r * self.matrix,
                   terms=[[
                       TrigTerm(t.amplitude, r * t.wavevector, t.phase)
                       for t in row
                   ] for row in self.terms])

  def _samples(self, extent: float) -> List[np.ndarray]:
    h = 2.0 * extent / _HOLDER_SAMPLES
    axis = (np.arange(_HOLDER_SAMPLES) + 0.5) * h - extent
    return np.meshgrid(*([axis] * self.dim), indexing="ij")

  def sup_norm(self, extent: float) -> float:
    """sup over Q_R of |f| (exact for constant and affine, sampled for trig)."""
    if self.family == "constant":
      return float(np.linalg.norm(self.value))
    if self.family == "affine":
      corners = itertools.product((-extent, extent), repeat=self.dim)
      return max(
          float(np.linalg.norm(self.offset + self.matrix @ np.array(c)))
          for c in corners)
    values = self.evaluate(self._samples(extent))
    return float(np.max(np.sqrt(sum(v * v for v in values))))

  def holder_seminorm(self, alpha: float, extent: float) -> float:
    """[f]_{C^{0,alpha}(Q_R)}; the trig family uses a sampled surrogate."""
    if not 0 < alpha <= 1:
      raise ConfigurationError(f"alpha must lie in (0, 1] (got {alpha})",
                               key="forcing.alpha")
    if self.family == "constant":
      return 0.0
    if self.family == "affine":
      diameter = 2.0 * extent * math.sqrt(self.dim)
      return float(np.linalg.norm(self.matrix, 2)) * diameter**(1.0 - alpha)
    return _sampled_holder(self.evaluate(self._samples(extent)),
                           2.0 * extent / _HOLDER_SAMPLES, alpha)

  def holder_norm(self, alpha: float, extent: float) -> float:
    return self.sup_norm(extent) + self.holder_seminorm(alpha, extent)

  def to_dict(self) -> Dict:
    if self.family == "constant":
      return {"family": "constant", "value": self.value.tolist()}
    if self.family == "affine":
      return {
          "family": "affine",
          "offset": self.offset.tolist(),
          "matrix": self.matrix.tolist()
      }
    return {
        "family":
            "trig",
        "terms": [[{
            "amplitude": t.amplitude,
            "wavevector": t.wavevector.tolist(),
            "phase": t.phase
        } for t in row] for row in self.terms]
    }

  def __repr__(self):
    return f"Forcing({self.to_dict()})"


def _directions(dim: int) -> List[np.ndarray]:
  """Axis and diagonal lattice directions, one of each +- pair."""
  out = []
  for v in itertools.product((-1, 0, 1), repeat=dim):
    nz = [c for c in v if c != 0]
    if nz and nz[0] > 0:
      out.append(np.array(v))
  return out


def _sampled_holder(values: List[np.ndarray], h: float, alpha: float) -> float:
  n = values[0].shape[0]
  dim = values[0].ndim
  best = 0.0
  step = 1
  while step < n:
    for d in _directions(dim):
      shift = d * step
      lo = tuple(slice(max(0, -s), n - max(0, s)) for s in shift)
      hi = tuple(slice(max(0, s), n - max(0, -s)) for s in shift)
      diff = np.sqrt(sum((v[hi] - v[lo])**2 for v in values))
      dist = h * step * math.sqrt(float(d @ d))
      if diff.size:
        best = max(best, float(np.max(diff)) / dist**alpha)
    step *= 2
  return best


def sample_faces(forcing: Forcing, grid: MacGrid) -> FaceField:
  """Component a of f at the component-a velocity nodes."""
  return [forcing.component(a, grid.face_centers(a)) for a in range(grid.dim)]


def sample_cells(forcing: Forcing, grid: MacGrid) -> List[np.ndarray]:
  return forcing.evaluate(grid.cell_centers())


class MatrixForcing:
  """f_ab(x) = amplitude * sin(pi k x_b / R) delta_ab on the torus (-R, R)^d."""

  def __init__(self, dim: int, amplitude: float, wavenumber: int,
               extent: float):
    if int(wavenumber) != wavenumber or wavenumber < 1:
      raise ConfigurationError(
          f"div_wavenumber must be a positive integer (got {wavenumber})",
          key="forcing.div_wavenumber")
    self.dim = dim
    self.amplitude = float(amplitude)
    self.wavenumber = int(wavenumber)
    self.extent = float(extent)

  def _omega(self) -> float:
    return math.pi * self.wavenumber / self.extent

  def diagonal_cells(self, grid: MacGrid) -> List[np.ndarray]:
    """f_aa at the cell centers."""
    centers = grid.cell_centers()
    return [
        self.amplitude * np.sin(self._omega() * centers[a])
        for a in range(self.dim)
    ]

  def divergence_faces(self, grid: MacGrid) -> FaceField:
    """(div f)_a = d_a f_aa, exact at the component-a faces."""
    out = []
    for a in range(self.dim):
      x = grid.face_centers(a)[a]
      out.append(self.amplitude * self._omega() * np.cos(self._omega() * x))
    return out

  def magnitude_cells(self, grid: MacGrid) -> np.ndarray:
    return np.sqrt(sum(f * f for f in self.diagonal_cells(grid)))

  def __repr__(self):
    return (f"MatrixForcing(amplitude={self.amplitude}, "
            f"wavenumber={self.wavenumber}, extent={self.extent})")
