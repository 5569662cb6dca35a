# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.cell import *
from darcy_lab.discrete.errors import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *

square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
cell = solve_cell_problem(square, 16)
K = cell.K

# CHECK: CellSolution(resolution=16
print(cell)
# CHECK: bitwise symmetric True
print("bitwise symmetric", bool(np.array_equal(K, K.T)))
# CHECK: positive definite True
print("positive definite", bool(np.all(np.linalg.eigvalsh(K) > 0)))
# The square is invariant under the swap of the axes.
# CHECK: isotropic True off-diagonal True
print("isotropic", abs(K[0, 0] - K[1, 1]) <= 1e-8 * K[0, 0], "off-diagonal",
      abs(K[0, 1]) <= 1e-8 * K[0, 0])
# Testing the corrector equation against W itself gives mean(W) = energy.
# CHECK: averages agree True
print("averages agree",
      float(np.max(np.abs(cell.K_avg - cell.K_energy))) <= 1e-6 * K[0, 0])

# A smaller obstacle lets more fluid through.
small = make_obstacle(ObstacleSpec("centered-square", side=0.25), 8)
# CHECK: monotone True
print("monotone", bool(solve_cell_problem(small, 16).K[0, 0] > K[0, 0]))

# Correctors vanish on the solid.
# CHECK: solid corrector 0.0
solid_faces = ~cell.fluid_faces[0]
print("solid corrector", float(np.max(np.abs(cell.W[0][0][solid_faces]))))

# Tiling eps = 1/2 onto (-1/2, 1/2)^2 at 32 cells per unit.
grid = build_mac_grid(2, 32, 0.5, BOX)
tiled = tile_corrector(cell, 0.5, grid)
# CHECK: tiled shapes [(33, 32), (32, 33)]
print("tiled shapes", [w.shape for w in tiled[0]])
# The cell at x = 0 is voxel 0 of a period.
# CHECK: origin cell True
print("origin cell", bool(tiled[0][0][16, 16] == cell.W[0][0][0, 0]))
# CHECK: resolution: grid resolution 24 does not tile
try:
  tile_corrector(cell, 0.5, build_mac_grid(2, 24, 0.5, BOX))
except ConfigurationError as e:
  print(e)

# CHECK: gram positive True
gram = gram_matrix(cell, 0.5, Box.centered(0.5), 1.0, grid, tiled)
print("gram positive", bool(np.all(np.linalg.eigvalsh(gram.matrix) > 0)))
# CHECK: DomainTooSmall
try:
  gram_matrix(cell, 0.5, Box.centered(0.25), 1.0, grid, tiled)
except DomainTooSmall as e:
  print(type(e).__name__)

# CHECK: IncompatibleData
try:
  solve_cell_problem(np.zeros((8, 8), dtype=bool))
except IncompatibleData as e:
  print(type(e).__name__)
