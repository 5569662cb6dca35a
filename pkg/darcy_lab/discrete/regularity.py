"""Measurements of the quantities entering the large-scale regularity
estimates for the eps-Stokes problem.

Every ratio operation returns a `Measurement` (left side, right side, their
ratio and a flag). Boxes are centered at the origin and snapped outward to
the grid; averages use the midpoint rule on cells, with face quantities
averaged to cells first.

  >>> Measurement.of("demo", 0.0, 0.0).flag
  'zero_over_zero'
  >>> Measurement.of("demo", 1.0, 4.0).ratio
  0.25
"""

from typing import List, Optional, Sequence, Tuple, Union
import itertools
import logging

import numpy as np
from scipy import ndimage

from .cell import *
from .errors import *
from .forcing import *
from .grid import *
from .stokes import *

__all__ = [
    "ZERO_OVER_ZERO",
    "ZERO_RHS",
    "ExcessReport",
    "Measurement",
    "RateFit",
    "average_bound_ratio",
    "boundary_layer_norm",
    "caccioppoli_ratio",
    "energy_density",
    "excess",
    "excess_lattice_check",
    "forcing_at_origin",
    "g_field",
    "lipschitz_quantity",
    "poincare_ratio",
    "pressure_excess",
    "pressure_mean_drift",
    "reverse_holder_ratio",
]

logger = logging.getLogger(__name__)

ZERO_OVER_ZERO = "zero_over_zero"
ZERO_RHS = "zero_rhs"


class Measurement:
  """One measured inequality: quantity, lhs, rhs, ratio = lhs / rhs, flag."""

  def __init__(self,
               quantity: str,
               lhs: float,
               rhs: float,
               ratio: float,
               flag: str = "",
               r: Optional[float] = None,
               R: Optional[float] = None,
               delta: Optional[float] = None,
               q: Optional[float] = None):
    self.quantity = quantity
    self.lhs = lhs
    self.rhs = rhs
    self.ratio = ratio
    self.flag = flag
    self.r = r
    self.R = R
    self.delta = delta
    self.q = q

  @classmethod
  def of(cls, quantity: str, lhs: float, rhs: float, **params) -> "Measurement":
    lhs, rhs = float(lhs), float(rhs)
    if rhs == 0.0:
      if lhs == 0.0:
        return cls(quantity, lhs, rhs, 0.0, ZERO_OVER_ZERO, **params)
      return cls(quantity, lhs, rhs, float("inf"), ZERO_RHS, **params)
    return cls(quantity, lhs, rhs, lhs / rhs, "", **params)

  def __repr__(self):
    params = ", ".join(f"{k}={getattr(self, k)}"
                       for k in ("r", "R", "delta", "q")
                       if getattr(self, k) is not None)
    return (f"Measurement({self.quantity}, lhs={self.lhs:.6g}, "
            f"rhs={self.rhs:.6g}, ratio={self.ratio:.6g}"
            f"{', ' + params if params else ''}"
            f"{', flag=' + self.flag if self.flag else ''})")


class RateFit:
  """Least-squares power law value ~ scale**slope."""

  def __init__(self, points: List[Tuple[float, float]], slope: float,
               intercept: float, r2: float):
    self.points = points
    self.slope = slope
    self.intercept = intercept
    self.r2 = r2

  def __repr__(self):
    return (f"RateFit(slope={self.slope:.6g}, r2={self.r2:.6g}, "
            f"points={len(self.points)})")


class ExcessReport:
  """Corrector-multiple excesses of u (and p) on Q_r and their minimizers.

  `excess_p` and `gamma_star` come from the joint pressure fit of
  `pressure_excess`; the ratio uses the velocity excesses only.
  """

  def __init__(self,
               r: float,
               R: float,
               epsilon: float,
               excess_u: float,
               excess_grad: float,
               E_star: np.ndarray,
               E_star_grad: np.ndarray,
               rhs: float,
               excess_p: float = 0.0,
               gamma_star: float = 0.0):
    self.r = r
    self.R = R
    self.epsilon = epsilon
    self.excess_u = excess_u
    self.excess_grad = excess_grad
    self.excess_p = excess_p
    self.E_star = E_star
    self.E_star_grad = E_star_grad
    self.gamma_star = gamma_star
    self.rhs = rhs
    self.measurement = Measurement.of("excess",
                                      excess_u + excess_grad,
                                      rhs,
                                      r=r,
                                      R=R)

  @property
  def ratio(self) -> float:
    return self.measurement.ratio

  def __repr__(self):
    return (f"ExcessReport(r={self.r}, excess_u={self.excess_u:.6g}, "
            f"excess_grad={self.excess_grad:.6g}, "
            f"E_star={np.array2string(self.E_star, precision=6)})")


def _centered(grid: MacGrid, r: float) -> SnappedBox:
  return Box.centered(r).snap(grid)


def _check_scale(state: FlowState, r: float, what: str = "r"):
  if r < state.epsilon * (1.0 - 1e-9):
    raise DomainTooSmall(f"{what} = {r} is below the period "
                         f"eps = {state.epsilon}")


def _gradient_magnitude(state: FlowState) -> np.ndarray:
  return np.sqrt(np.maximum(state.gradient().squared_norm_cells(), 0.0))


def energy_density(state: FlowState) -> np.ndarray:
  """(eps |grad u| + |u|)^2 per cell."""
  return (state.epsilon * _gradient_magnitude(state) +
          cell_magnitude(state.grid, state.u))**2


def _velocity_average(state: FlowState, box: SnappedBox) -> float:
  return box_average_l2(state.grid, state.u, box)


def _bracket(state: FlowState, forcing: Forcing, R: float,
             alpha: float) -> float:
  """(avg_{Q_R} |u|^2)^(1/2) + R^alpha ||f||_{C^{0,alpha}(Q_R)}."""
  return (_velocity_average(state, _centered(state.grid, R)) +
          R**alpha * forcing.holder_norm(alpha, R))


def _outer(state: FlowState, R: Optional[float]) -> float:
  return state.grid.extent if R is None else float(R)


def lipschitz_quantity(state: FlowState,
                       forcing: Forcing,
                       r: float,
                       R: Optional[float] = None,
                       alpha: float = 0.9) -> Measurement:
  """eps (avg_{Q_r}|grad u|^2)^(1/2) + (avg_{Q_r}|u|^2)^(1/2) against the
  bracket on Q_R, for eps <= r < R/2."""
  R = _outer(state, R)
  _check_scale(state, r)
  if r >= R / 2:
    raise ConfigurationError(f"r = {r} must be below R/2 = {R / 2}", key="r")
  grid = state.grid
  box = _centered(grid, r)
  grad = np.sqrt(box_average(grid, state.gradient().squared_norm_cells(), box))
  lhs = state.epsilon * grad + _velocity_average(state, box)
  return Measurement.of("lipschitz",
                        lhs,
                        _bracket(state, forcing, R, alpha),
                        r=r,
                        R=R)


def average_bound_ratio(state: FlowState,
                        forcing: Forcing,
                        r: float,
                        R: Optional[float] = None,
                        alpha: float = 0.9) -> Measurement:
  """(avg_{Q_r}|u|^2)^(1/2) against the bracket on Q_R, for eps <= r < R."""
  R = _outer(state, R)
  _check_scale(state, r)
  if r >= R:
    raise ConfigurationError(f"r = {r} must be below R = {R}", key="r")
  lhs = _velocity_average(state, _centered(state.grid, r))
  return Measurement.of("average_bound",
                        lhs,
                        _bracket(state, forcing, R, alpha),
                        r=r,
                        R=R)


def excess(state: FlowState,
           cell: CellSolution,
           r: float,
           forcing: Optional[Forcing] = None,
           R: Optional[float] = None,
           alpha: float = 0.9,
           tiled: Optional[List[FaceField]] = None) -> ExcessReport:
  """inf_E (avg_{Q_r}|u - mu^-1 W(x/eps)E|^2)^(1/2) and, minimized
  separately, inf_E eps (avg_{Q_r}|grad(u - mu^-1 W(x/eps)E)|^2)^(1/2)."""
  R = _outer(state, R)
  _check_scale(state, r)
  grid = state.grid
  mu = state.mu
  if tiled is None:
    tiled = tile_corrector(cell, state.epsilon, grid)
  gram = gram_matrix(cell, state.epsilon, Box.centered(r), mu, grid, tiled)
  box = gram.box
  E = gram.minimize(state.u)
  remainder = gram.remainder(state.u, E)
  excess_u = box_average_l2(grid, remainder, box, location="cells")

  fluid = state.domain.fluid_faces
  basis = [[c / mu for c in w] for w in tiled]
  grads = [discrete_gradient_velocity(grid, w, fluid) for w in basis]
  grad_u = state.gradient()
  d = len(basis)
  Mg = np.zeros((d, d))
  bg = np.zeros(d)
  for i in range(d):
    bg[i] = box_average(grid, grad_u.inner_cells(grads[i]), box)
    for j in range(d):
      Mg[i, j] = box_average(grid, grads[i].inner_cells(grads[j]), box)
  try:
    np.linalg.cholesky(Mg)
  except np.linalg.LinAlgError:
    raise DomainTooSmall(f"corrector gradient Gram matrix on {box} is not "
                         f"positive definite") from None
  E_grad = np.linalg.solve(Mg, bg)
  diff = [
      np.asarray(state.u[a]) - sum(E_grad[i] * basis[i][a] for i in range(d))
      for a in range(d)
  ]
  g_diff = discrete_gradient_velocity(grid, diff, fluid)
  excess_grad = state.epsilon * np.sqrt(
      max(box_average(grid, g_diff.squared_norm_cells(), box), 0.0))
  rhs = (_bracket(state, forcing, R, alpha) if forcing is not None else
         _velocity_average(state, _centered(grid, R)))
  excess_p, _, _, coef = _pressure_fit(state, cell, r, forcing)
  report = ExcessReport(r,
                        R,
                        state.epsilon,
                        float(excess_u),
                        float(excess_grad),
                        E,
                        E_grad,
                        rhs,
                        excess_p=excess_p,
                        gamma_star=float(coef[0]))
  logger.debug("excess at r=%g: %s", r, report)
  return report


def excess_lattice_check(state: FlowState,
                         cell: CellSolution,
                         r: float,
                         spacing: Optional[float] = None,
                         points: int = 5) -> Tuple[float, float]:
  """(closed-form excess_u, smallest excess_u over a points^d lattice of E
  around E*). The first never exceeds the second."""
  grid = state.grid
  tiled = tile_corrector(cell, state.epsilon, grid)
  gram = gram_matrix(cell, state.epsilon, Box.centered(r), state.mu, grid,
                     tiled)
  E = gram.minimize(state.u)
  best = box_average_l2(grid, gram.remainder(state.u, E), gram.box,
                        location="cells")
  if spacing is None:
    spacing = 0.1 * max(1.0, float(np.max(np.abs(E))))
  offsets = (np.arange(points) - (points - 1) / 2.0) * spacing
  lattice = np.inf
  for shift in itertools.product(offsets, repeat=len(E)):
    trial = E + np.asarray(shift)
    value = box_average_l2(grid, gram.remainder(state.u, trial), gram.box,
                           location="cells")
    lattice = min(lattice, value)
  return float(best), float(lattice)


def forcing_at_origin(state: FlowState,
                      forcing: Optional[Forcing] = None) -> np.ndarray:
  """f(0): exact for an analytic forcing, else the mean of the 2^d cells
  touching the origin."""
  if forcing is not None:
    return forcing.at_origin()
  grid = state.grid
  half = grid.half_cells
  around = tuple(slice(half - 1, half + 1) for _ in range(grid.dim))
  return np.array([float(np.mean(c[around]))
                   for c in faces_to_cells(grid, state.f)])


def _pressure_fit(state: FlowState, cell: CellSolution, r: float,
                  forcing: Optional[Forcing]) -> Tuple[float, float, float,
                                                       np.ndarray]:
  """(joint, frozen, oscillation, [gamma, E...]) on the fluid cells of Q_r."""
  grid = state.grid
  box = _centered(grid, r)
  fluid = state.domain.fluid_cells[box.slices]
  x = [c[box.slices][fluid] for c in grid.cell_centers()]
  p = state.p[box.slices][fluid]
  if p.size == 0:
    raise DomainTooSmall(f"{box} holds no fluid cells")
  f0 = forcing_at_origin(state, forcing)
  target = p - sum(x[j] * f0[j] for j in range(grid.dim))
  pis = tile_pressure(cell, state.epsilon, grid)
  columns = [np.ones_like(p)] + [
      state.epsilon * pis[j][box.slices][fluid] - x[j]
      for j in range(grid.dim)
  ]
  A = np.stack(columns, axis=1)
  coef, *_ = np.linalg.lstsq(A, target, rcond=None)
  joint = np.sqrt(np.mean((target - A @ coef)**2)) / r
  frozen = np.sqrt(np.mean((target - target.mean())**2)) / r
  oscillation = np.sqrt(np.mean((p - p.mean())**2)) / r
  return float(joint), float(frozen), float(oscillation), coef


def pressure_excess(state: FlowState,
                    cell: CellSolution,
                    r: float,
                    forcing: Optional[Forcing] = None,
                    R: Optional[float] = None,
                    alpha: float = 0.9) -> List[Measurement]:
  """Pressure excesses on the fluid cells of Q_r, each scaled by 1/r.

  pressure_excess: min over (E, gamma) of
    p - gamma - x.f(0) - (eps pi(x/eps) - x).E;
  pressure_excess_frozen: the same with E = 0;
  pressure_oscillation: p minus its mean.
  """
  R = _outer(state, R)
  _check_scale(state, r)
  grid = state.grid
  joint, frozen, oscillation, _ = _pressure_fit(state, cell, r, forcing)
  if forcing is not None:
    bracket = _bracket(state, forcing, R, alpha)
    sup = forcing.sup_norm(R)
  else:
    bracket = _velocity_average(state, _centered(grid, R))
    sup = float(np.max(cell_magnitude(grid, state.f)))
  return [
      Measurement.of("pressure_excess", joint, bracket, r=r, R=R),
      Measurement.of("pressure_excess_frozen", frozen, bracket, r=r, R=R),
      Measurement.of("pressure_oscillation",
                     oscillation,
                     bracket + sup,
                     r=r,
                     R=R),
  ]


def pressure_mean_drift(state: FlowState,
                        forcing: Forcing,
                        R: Optional[float] = None,
                        alpha: float = 0.9) -> Measurement:
  """|avg_{Q_eps^eps} p - avg_{Q_{R/2}^eps} p| against
  R {(avg_{Q_R}|u|^2)^(1/2) + ||f||_inf + R^alpha ||f||_{C^{0,alpha}}}."""
  R = _outer(state, R)
  grid = state.grid
  fluid = state.domain.fluid_cells
  near = box_average(grid, state.p, _centered(grid, state.epsilon), fluid)
  far = box_average(grid, state.p, _centered(grid, R / 2), fluid)
  rhs = R * (_bracket(state, forcing, R, alpha) + forcing.sup_norm(R))
  return Measurement.of("pressure_mean_drift", abs(near - far), rhs, R=R)


def g_field(state: FlowState,
            epsilon: Optional[float] = None) -> np.ma.MaskedArray:
  """g(x) = (avg_{Q(x, eps)} (eps|grad u| + |u|)^2)^(1/2) at cell centers.

  On a box grid the cells whose window leaves the grid are masked; on a
  periodic grid the window wraps.
  """
  grid = state.grid
  epsilon = state.epsilon if epsilon is None else epsilon
  half = int(round(epsilon * grid.n_per_unit))
  size = 2 * half + 1
  density = energy_density(state)
  mode = "wrap" if grid.periodic else "constant"
  mean = ndimage.uniform_filter(density, size=size, mode=mode)
  mask = np.zeros(grid.cell_shape, dtype=bool)
  if not grid.periodic:
    idx = np.arange(grid.cells_per_axis)
    ring = (idx < half) | (idx > grid.cells_per_axis - 1 - half)
    for a in range(grid.dim):
      shape = [1] * grid.dim
      shape[a] = -1
      mask |= ring.reshape(shape)
  return np.ma.masked_array(np.sqrt(np.maximum(mean, 0.0)), mask=mask)


def reverse_holder_ratio(state: FlowState, q: float,
                         R: float) -> Measurement:
  """(avg_{Q_R}|g|^q)^(1/q) against
  (avg_{Q_2R}(eps|grad u|+|u|)^2)^(1/2) + (avg_{Q_2R}|f|^q)^(1/q)."""
  if q <= 2:
    raise ConfigurationError(f"reverse Holder exponent must exceed 2 "
                             f"(got {q})",
                             key="sweep.reverse_holder_q")
  _check_scale(state, R, "R")
  grid = state.grid
  outer = _centered(grid, 2 * R)
  inner = _centered(grid, R)
  g = g_field(state)
  if np.ma.count_masked(g[inner.slices]):
    raise DomainTooSmall(f"the eps-windows around Q_{R} leave the grid")
  lhs = float(np.mean(np.ma.getdata(g)[inner.slices]**q))**(1.0 / q)
  rhs = (np.sqrt(box_average(grid, energy_density(state), outer)) +
         box_average_l2(grid, state.f, outer, q=q))
  return Measurement.of("reverse_holder", lhs, rhs, R=R, q=q)


def caccioppoli_ratio(state: FlowState, R: float,
                      outer: str = "2R") -> Measurement:
  """eps^2 int_{Q_R}|grad u|^2 + R^-2 int_{Q_R^eps}|p - mean|^2 against
  int_{Q'}|u|^2 + int_{Q'^eps}|f|^2 with Q' = Q_2R or Q_{R+eps}."""
  eps = state.epsilon
  if R < 2 * eps * (1.0 - 1e-9):
    raise DomainTooSmall(f"R = {R} is below 2 eps = {2 * eps}")
  if outer == "2R":
    outer_r = 2 * R
  elif outer == "R+eps":
    periods = R / eps
    if abs(periods - round(periods)) > 1e-9 * periods:
      raise ConfigurationError(f"R = {R} is not a multiple of eps = {eps}",
                               key="sweep.caccioppoli_radii")
    outer_r = R + eps
  else:
    raise ConfigurationError(f"outer must be '2R' or 'R+eps' (got {outer!r})",
                             key="outer")
  grid = state.grid
  vol = grid.cell_volume
  fluid = state.domain.fluid_cells
  inner = _centered(grid, R)
  big = _centered(grid, outer_r)
  grad = np.sum(state.gradient().squared_norm_cells()[inner.slices]) * vol
  p = state.p[inner.slices][fluid[inner.slices]]
  osc = np.sum((p - p.mean())**2) * vol if p.size else 0.0
  lhs = eps**2 * grad + osc / R**2
  u2 = np.sum(cell_magnitude(grid, state.u)[big.slices]**2) * vol
  f2 = np.sum((cell_magnitude(grid, state.f)**2)[big.slices][fluid[
      big.slices]]) * vol
  quantity = "caccioppoli" if outer == "2R" else "caccioppoli_r_plus_eps"
  return Measurement.of(quantity, lhs, u2 + f2, R=R)


def poincare_ratio(state: FlowState,
                   q: float = 2.0,
                   R: Optional[float] = None) -> Measurement:
  """||u||_{L^q} against eps ||grad u||_{L^q} on Q_R (default the grid)."""
  grid = state.grid
  box = _centered(grid, _outer(state, R))
  lhs = box_average_l2(grid, state.u, box, q=q)
  grad = box_average(grid, _gradient_magnitude(state)**q, box)**(1.0 / q)
  return Measurement.of("poincare",
                        lhs,
                        state.epsilon * grad,
                        R=_outer(state, R),
                        q=q)


def boundary_layer_norm(state: FlowState, delta: float,
                        sup_f: Optional[float] = None) -> Measurement:
  """The energy in a delta-neighbourhood of dQ_L with L = R/3, rescaled.

  Rescaling x = L y maps Q_R to Q_3 and eps to eps/L; lhs is
  (int_{Q_{L(1+delta)} \\ Q_{L(1-delta)}} (eps|grad u|+|u|)^2)^(1/2) and rhs
  is (int_{Q_R} (eps|grad u|+|u|)^2)^(1/2) + ||f||_inf, both in rescaled
  units, for eps/L < delta <= 1.
  """
  grid = state.grid
  L = grid.extent / 3.0
  eps_unit = state.epsilon / L
  if not eps_unit < delta <= 1.0:
    raise ConfigurationError(
        f"delta = {delta} must lie in (eps/L, 1] = ({eps_unit:.6g}, 1]",
        key="sweep.deltas")
  vol = grid.cell_volume
  density = energy_density(state)
  outer = _centered(grid, L * (1.0 + delta))
  annulus = outer.mask()
  if L * (1.0 - delta) > 0:
    annulus &= ~_centered(grid, L * (1.0 - delta)).mask()
  scale = L**(-grid.dim / 2.0)
  lhs = scale * np.sqrt(np.sum(density[annulus]) * vol)
  if sup_f is None:
    sup_f = float(np.max(cell_magnitude(grid, state.f)))
  rhs = scale * np.sqrt(np.sum(density) * vol) + sup_f
  return Measurement.of("boundary_layer", lhs, rhs, delta=delta)
