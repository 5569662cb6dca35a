# RUN: %PYTHON %s | FileCheck %s

import doctest

from darcy_lab.discrete import forcing
from darcy_lab.discrete import geometry
from darcy_lab.discrete import grid
from darcy_lab.discrete import regularity
from darcy_lab.experiments import config
from darcy_lab.experiments import fitting

# CHECK: darcy_lab.discrete.grid failed=0
# CHECK: darcy_lab.discrete.geometry failed=0
# CHECK: darcy_lab.discrete.forcing failed=0
# CHECK: darcy_lab.discrete.regularity failed=0
# CHECK: darcy_lab.experiments.config failed=0
# CHECK: darcy_lab.experiments.fitting failed=0
for module in (grid, geometry, forcing, regularity, config, fitting):
  result = doctest.testmod(module)
  print(module.__name__, f"failed={result.failed}")
