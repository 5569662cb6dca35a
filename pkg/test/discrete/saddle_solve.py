# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.errors import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *
from darcy_lab.discrete.stokes import *


def l2_relative(a, b):
  return float(np.linalg.norm(a - b)) / max(float(np.linalg.norm(b)), 1e-300)


square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
grid = build_mac_grid(2, 16, 0.5, BOX)
domain = perforate(square, 0.5, grid)
system = assemble(domain)

# CHECK: pressure dofs 192 components 1
print("pressure dofs", system.num_pressure, "components", system.components)

# The leg quadrature reproduces u^T A u.
# CHECK: energy identity True
rng = np.random.default_rng(3)
uvec = rng.standard_normal(system.num_velocity)
quadratic = float(uvec @ (system.A @ uvec))
legs = system.epsilon**2 * discrete_gradient_velocity(
    grid, system.extend_faces(uvec), domain.fluid_faces).energy()
print("energy identity", abs(quadratic - legs) <= 1e-12 * quadratic)

f = [np.ones(grid.face_shape(0)), np.zeros(grid.face_shape(1))]
state = solve(system, f, tol=1e-10)
momentum, div = residual(system, state)
# CHECK: momentum True divergence True
print("momentum", momentum < 1e-8, "divergence", div < 1e-8)

# Off the fluid both fields vanish; the pressure has zero mean.
# CHECK: solid velocity 0.0
# CHECK: pressure mean True
solid_faces = ~domain.fluid_faces[0]
print("solid velocity", float(np.max(np.abs(state.u[0][solid_faces]))))
print("pressure mean", abs(float(state.p[domain.fluid_cells].mean())) < 1e-12)

# Uzawa agrees with the direct KKT factorization on random forcings.
# CHECK: oracle 0 u True p True
# CHECK: oracle 1 u True p True
# CHECK: oracle 2 u True p True
oracle_rng = np.random.default_rng(11)
for k in range(3):
  g = [oracle_rng.standard_normal(s) for s in grid.face_shapes]
  fine = solve(system, g, tol=1e-12)
  oracle = solve_dense_oracle(system, g)
  print("oracle", k, "u",
        l2_relative(grid.pack_faces(fine.u), grid.pack_faces(oracle.u)) <
        1e-10, "p",
        l2_relative(fine.p.ravel(), oracle.p.ravel()) < 1e-10)

# CHECK: energy balance True
lhs, rhs = energy_balance(system, state)
print("energy balance", abs(lhs - rhs) <= 1e-6 * rhs)

# CHECK: zero forcing 0 0.0
still = solve(system, grid.zero_faces())
print("zero forcing", still.iterations, float(np.max(np.abs(grid.pack_faces(still.u)))))

# CHECK: outer_bc: outer boundary condition 'periodic' does not match a box grid
try:
  assemble(domain, outer_bc=PERIODIC)
except ConfigurationError as e:
  print(e)

# A torus without obstacle cannot balance a mean forcing.
torus = build_mac_grid(2, 8, 0.5, PERIODIC)
empty = perforate(np.zeros((8, 8), dtype=bool), 1.0, torus)
# CHECK: IncompatibleData
try:
  solve(assemble(empty), [np.ones(s) for s in torus.face_shapes])
except IncompatibleData as e:
  print(type(e).__name__)

# CHECK: solver.oracle_max_dofs
try:
  solve_dense_oracle(system, f, max_dofs=10)
except ConfigurationError as e:
  print(e.key)
