# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.cell import *
from darcy_lab.discrete.errors import *
from darcy_lab.discrete.forcing import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *
from darcy_lab.discrete.regularity import *
from darcy_lab.discrete.stokes import *

square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
cell = solve_cell_problem(square, 8)
eps = 0.25
grid = build_mac_grid(2, 32, 1.0, BOX)
domain = perforate(square, eps, grid)
system = assemble(domain)

# A velocity that is exactly a corrector multiple, with the matching
# two-scale pressure gamma + (eps pi(x/eps) - x).E.
tiled = tile_corrector(cell, eps, grid)
E = np.array([2.0, -1.0])
u = [
    np.where(domain.fluid_faces[a], E[0] * tiled[0][a] + E[1] * tiled[1][a],
             0.0) for a in range(2)
]
x = grid.cell_centers()
pis = tile_pressure(cell, eps, grid)
p = 0.3 + sum(E[j] * (eps * pis[j] - x[j]) for j in range(2))
p = np.where(domain.fluid_cells, p, 0.0)
state = FlowState(system, u, p, grid.zero_faces())

# CHECK: excess_u True excess_grad True
report = excess(state, cell, 0.5)
print("excess_u", report.excess_u < 1e-10, "excess_grad",
      report.excess_grad < 1e-10)
# CHECK: minimizers True True
print("minimizers", bool(np.allclose(report.E_star, E)),
      bool(np.allclose(report.E_star_grad, E)))
# CHECK: excess_p True gamma 0.3
print("excess_p", report.excess_p < 1e-10, "gamma", round(report.gamma_star, 8))

# CHECK: pressure_excess True
# CHECK: pressure_excess_frozen True
# CHECK: pressure_oscillation True
for m in pressure_excess(state, cell, 0.5):
  print(m.quantity, m.lhs < 1e-10 if m.quantity == "pressure_excess" else m.lhs > 0)

# CHECK: lattice True
closed, lattice = excess_lattice_check(state, cell, 0.5)
print("lattice", closed <= lattice)

# CHECK: DomainTooSmall
try:
  excess(state, cell, 0.125)
except DomainTooSmall as e:
  print(type(e).__name__)

forcing = Forcing.constant([1.0, 0.0])
# CHECK: Measurement(lipschitz, {{.*}}, r=0.25, R=1.0)
print(lipschitz_quantity(state, forcing, 0.25))
# CHECK: r: r = 0.5 must be below R/2 = 0.5
try:
  lipschitz_quantity(state, forcing, 0.5)
except ConfigurationError as e:
  print(e)
# CHECK: average_bound True
m = average_bound_ratio(state, forcing, 0.5)
print(m.quantity, 0 < m.ratio < np.inf)

# Windows of half-width eps = 8 cells are masked near the box boundary.
# CHECK: g_field unmasked 2304
print("g_field unmasked", int(np.ma.count(g_field(state))))
# CHECK: sweep.reverse_holder_q: reverse Holder exponent must exceed 2 (got 2)
try:
  reverse_holder_ratio(state, 2, 0.25)
except ConfigurationError as e:
  print(e)
# CHECK: reverse_holder q=3 True
m = reverse_holder_ratio(state, 3, 0.25)
print(m.quantity, f"q={m.q}", m.ratio > 0)

# CHECK: caccioppoli True
# CHECK: caccioppoli_r_plus_eps True
for outer in ("2R", "R+eps"):
  m = caccioppoli_ratio(state, 0.5, outer)
  print(m.quantity, m.flag == "" and m.ratio > 0)
# CHECK: DomainTooSmall
try:
  caccioppoli_ratio(state, 0.25)
except DomainTooSmall as e:
  print(type(e).__name__)

# CHECK: poincare True
m = poincare_ratio(state)
print(m.quantity, 0 < m.ratio < np.inf)

# L = 1/3, so admissible deltas exceed eps/L = 0.75.
# CHECK: boundary_layer delta=1.0 True
m = boundary_layer_norm(state, 1.0, sup_f=0.0)
print(m.quantity, f"delta={m.delta}", 0 < m.ratio <= 1.0)
# CHECK: sweep.deltas: delta = 0.5 must lie in (eps/L, 1] = (0.75, 1]
try:
  boundary_layer_norm(state, 0.5)
except ConfigurationError as e:
  print(e)

# CHECK: zero_rhs inf
m = Measurement.of("demo", 1.0, 0.0)
print(m.flag, m.ratio)

# CHECK: drift True
m = pressure_mean_drift(state, forcing)
print("drift", m.lhs >= 0 and m.rhs > 0)
