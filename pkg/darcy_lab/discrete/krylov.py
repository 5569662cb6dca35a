"""Conjugate-gradient kernels shared by the Stokes and Darcy solvers."""

from typing import Callable, Optional, Tuple
import logging

import numpy as np

from .errors import *

__all__ = [
    "CGInfo",
    "component_mean_projector",
    "identity_projector",
    "projected_cg",
]

logger = logging.getLogger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]


class CGInfo:

  def __init__(self, iterations: int, residual: float):
    self.iterations = iterations
    self.residual = residual

  def __repr__(self):
    return f"CGInfo(iterations={self.iterations}, residual={self.residual:.3e})"


def identity_projector(x: np.ndarray) -> np.ndarray:
  return x


def component_mean_projector(labels: np.ndarray) -> Operator:
  """Returns x -> x minus its mean over each labelled component.

  `labels` holds a component id >= 0 per entry, or -1 for entries that are
  left untouched.
  """
  labels = np.asarray(labels).ravel()
  active = labels >= 0
  ids = labels[active]
  count = int(ids.max()) + 1 if ids.size else 0
  sizes = np.bincount(ids, minlength=count).astype(float)

  def project(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    means = np.bincount(ids, weights=flat[active], minlength=count) / sizes
    out = flat.copy()
    out[active] -= means[ids]
    return out.reshape(x.shape)

  return project


def projected_cg(apply: Operator,
                 rhs: np.ndarray,
                 project: Operator = identity_projector,
                 tol: float = 1e-10,
                 max_iter: Optional[int] = None,
                 x0: Optional[np.ndarray] = None,
                 what: str = "cg") -> Tuple[np.ndarray, CGInfo]:
  """Solves apply(x) = rhs with x kept in the range of `project`.

  `apply` must be symmetric positive semi-definite with its null space
  removed by `project`. Convergence is ||rhs - apply(x)|| <= tol * ||rhs||.
  """
  rhs = project(np.asarray(rhs, dtype=float))
  if max_iter is None:
    max_iter = 10 * rhs.size
  x = np.zeros_like(rhs) if x0 is None else project(np.array(x0, dtype=float))
  norm_rhs = float(np.linalg.norm(rhs))
  if norm_rhs == 0.0:
    return np.zeros_like(rhs), CGInfo(0, 0.0)
  r = rhs - project(apply(x))
  d = r.copy()
  rr = float(r @ r)
  threshold = (tol * norm_rhs)**2
  it = 0
  while rr > threshold:
    if it >= max_iter:
      raise NonConvergence(it, np.sqrt(rr) / norm_rhs, what=what)
    ad = project(apply(d))
    dad = float(d @ ad)
    if dad <= 0.0:
      # Breakdown: the search direction lies in the null space.
      raise NonConvergence(it, np.sqrt(rr) / norm_rhs, what=what)
    alpha = rr / dad
    x += alpha * d
    r -= alpha * ad
    rr_new = float(r @ r)
    d = r + (rr_new / rr) * d
    rr = rr_new
    it += 1
  residual = np.sqrt(rr) / norm_rhs
  logger.debug("%s converged in %d iterations (residual %.3e)", what, it,
               residual)
  return x, CGInfo(it, residual)
