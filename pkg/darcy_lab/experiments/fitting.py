"""Power-law rate fitting on log-log data.

  >>> fit = fit_rate([(s, s**0.7) for s in (0.5, 0.25, 0.125)])
  >>> round(fit.slope, 12), round(fit.r2, 12)
  (0.7, 1.0)
  >>> fit_rate([(1.0, 2.0), (0.5, 2.0), (0.25, 2.0)]).slope
  0.0
"""

from typing import Iterable, Tuple

import numpy as np

from ..discrete.regularity import RateFit

__all__ = [
    "MIN_POINTS",
    "fit_rate",
]

MIN_POINTS = 3


def fit_rate(points: Iterable[Tuple[float, float]]) -> RateFit:
  """Least-squares slope of log(value) against log(scale), with R^2.

  Points are sorted by decreasing scale; scales must be distinct and both
  coordinates positive. A constant series has slope 0 and R^2 1.
  """
  pts = sorted(((float(s), float(v)) for s, v in points), reverse=True)
  if len(pts) < MIN_POINTS:
    raise ValueError(f"a rate fit needs at least {MIN_POINTS} points "
                     f"(got {len(pts)})")
  scales = np.array([s for s, _ in pts])
  values = np.array([v for _, v in pts])
  if np.any(scales <= 0) or np.any(values <= 0):
    raise ValueError(f"a rate fit needs positive scales and values "
                     f"(got {pts})")
  if np.any(np.diff(scales) >= 0):
    raise ValueError(f"scales must be distinct (got {scales.tolist()})")
  x = np.log(scales)
  y = np.log(values)
  if np.all(y == y[0]):
    return RateFit(pts, 0.0, float(y[0]), 1.0)
  slope, intercept = np.polyfit(x, y, 1)
  residual = y - (slope * x + intercept)
  total = float(np.sum((y - y.mean())**2))
  r2 = 1.0 - float(np.sum(residual**2)) / total
  return RateFit(pts, float(slope), float(intercept), r2)
