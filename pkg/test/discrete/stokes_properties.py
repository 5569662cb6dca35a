# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.cell import *
from darcy_lab.discrete.errors import *
from darcy_lab.discrete.forcing import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *
from darcy_lab.discrete.stokes import *


def l2_relative(a, b):
  return float(np.linalg.norm(a - b)) / max(float(np.linalg.norm(b)), 1e-300)


square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
grid = build_mac_grid(2, 16, 0.5, BOX)
system = assemble(perforate(square, 0.5, grid))

# Superposition of two random forcings.
rng = np.random.default_rng(17)
f1 = [rng.standard_normal(s) for s in grid.face_shapes]
f2 = [rng.standard_normal(s) for s in grid.face_shapes]
s1 = solve(system, f1, tol=1e-12)
s2 = solve(system, f2, tol=1e-12)
s12 = solve(system, [a + b for a, b in zip(f1, f2)], tol=1e-12)
# CHECK: linear u True p True
print("linear u",
      l2_relative(grid.pack_faces(s12.u),
                  grid.pack_faces(s1.u) + grid.pack_faces(s2.u)) < 1e-9,
      "p",
      l2_relative(s12.p.ravel(), s1.p.ravel() + s2.p.ravel()) < 1e-9)

# Solving at (eps, R) = (1/2, 1/2) with f equals solving at (1/4, 1/4) with
# g(y) = f(2y): u carries over and p scales by 1/2.
f = Forcing.affine([1.0, 0.5], [[0.0, 1.0], [-1.0, 0.0]])
g = Forcing.affine([1.0, 0.5], [[0.0, 2.0], [-2.0, 0.0]])
small = build_mac_grid(2, 32, 0.25, BOX)
large_state = solve(system, sample_faces(f, grid), tol=1e-12)
small_state = solve(assemble(perforate(square, 0.25, small)),
                    sample_faces(g, small),
                    tol=1e-12)
# CHECK: rescaled u True p True
print("rescaled u",
      l2_relative(grid.pack_faces(large_state.u),
                  small.pack_faces(small_state.u)) < 1e-8, "p",
      l2_relative(0.5 * large_state.p, small_state.p) < 1e-8)
# CHECK: rescaled average True
outer = box_average_l2(grid, large_state.u, Box.centered(0.25))
inner = box_average_l2(small, small_state.u, Box.centered(0.125))
print("rescaled average", abs(outer - inner) <= 1e-8 * outer)

# The tiled corrector and eps pi(x/eps) solve the eps-problem with f = e_j on
# the torus.
cell = solve_cell_problem(square, 8)
torus = build_mac_grid(2, 16, 0.5, PERIODIC)
periodic = assemble(perforate(square, 0.5, torus))
W = tile_corrector(cell, 0.5, torus)
pi = tile_pressure(cell, 0.5, torus)
for j in range(2):
  e = torus.zero_faces()
  e[j][:] = 1.0
  tiled = FlowState(periodic, W[j], 0.5 * pi[j], e)
  momentum, div = residual(periodic, tiled)
  # CHECK: tiled 0 momentum True divergence True
  # CHECK: tiled 1 momentum True divergence True
  print("tiled", j, "momentum", momentum < 1e-8, "divergence", div < 1e-8)
# CHECK: tiled matches solve True
direct = solve(periodic, e, tol=1e-12)
print("tiled matches solve",
      l2_relative(torus.pack_faces(direct.u), torus.pack_faces(W[1])) < 1e-8)

# A ring of solid voxels traps one fluid voxel per period.
ring = [(i, j) for i in (1, 2, 3) for j in (1, 2, 3) if (i, j) != (2, 2)]
pocket = make_obstacle(ObstacleSpec("voxel-list", voxels=ring), 6, check=False)
trapped = assemble(perforate(pocket, 0.5, build_mac_grid(2, 12, 0.5, BOX)))
ones = [np.ones(s) for s in trapped.grid.face_shapes]
# CHECK: components 5
print("components", trapped.components)
# CHECK: SingularSystem: 4 fluid component(s) carry no pressure mean constraint
try:
  solve_dense_oracle(trapped, ones, mean_constraint="global")
except SingularSystem as e:
  print(f"{type(e).__name__}: {e}")
# One mean row per component pins every pocket.
# CHECK: component oracle finite True
print("component oracle finite",
      bool(np.all(np.isfinite(solve_dense_oracle(trapped, ones).p))))
