# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.experiments.fitting import *

# CHECK: slope 0.5 r2 1.0
fit = fit_rate([(0.25, 0.5), (1.0, 1.0), (0.0625, 0.25)])
print("slope", round(fit.slope, 12), "r2", round(fit.r2, 12))
# Points come back ordered by decreasing scale.
# CHECK: scales [1.0, 0.25, 0.0625]
print("scales", [s for s, _ in fit.points])

# Noise lowers R^2 but keeps the trend.
# CHECK: noisy slope True r2 True
scales = 0.5**np.arange(5)
values = scales**0.8 * np.array([1.0, 1.2, 0.9, 1.1, 1.0])
noisy = fit_rate(zip(scales, values))
print("noisy slope", abs(noisy.slope - 0.8) < 0.1, "r2", 0.8 < noisy.r2 < 1.0)

# CHECK: ValueError a rate fit needs at least 3 points (got 2)
try:
  fit_rate([(1.0, 1.0), (0.5, 0.7)])
except ValueError as e:
  print(type(e).__name__, e)
# CHECK: ValueError a rate fit needs positive scales and values
try:
  fit_rate([(1.0, 1.0), (0.5, 0.0), (0.25, 0.1)])
except ValueError as e:
  print(type(e).__name__, e)
# CHECK: ValueError scales must be distinct
try:
  fit_rate([(1.0, 1.0), (0.5, 0.7), (0.5, 0.6)])
except ValueError as e:
  print(type(e).__name__, e)
