# RUN: %PYTHON %s | FileCheck %s

import os
import tempfile

import numpy as np

from darcy_lab.discrete.cell import *
from darcy_lab.discrete.errors import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *
from darcy_lab.discrete.stokes import *
from darcy_lab.io.field_file import *

square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
grid = build_mac_grid(2, 16, 0.5, BOX)
domain = perforate(square, 0.5, grid)
f = [np.ones(grid.face_shape(0)), np.full(grid.face_shape(1), 0.25)]
state = solve(assemble(domain, mu=2.0), f, tol=1e-10)
cell = solve_cell_problem(square, 8)

with tempfile.TemporaryDirectory() as d:
  flow_path = os.path.join(d, "flow.field")
  write_flow_state(flow_path, state)
  with open(flow_path, "r", encoding="utf-8") as fp:
    head = fp.read().split("\n...\n")[0].splitlines()
  # CHECK: --- !DarcyLabField
  # CHECK-NEXT: kind: flow_state
  # CHECK-NEXT: dim: 2
  # CHECK-NEXT: n_per_unit: 16
  # CHECK-NEXT: extent: 0.5
  # CHECK-NEXT: topology: box
  # CHECK-NEXT: epsilon: 0.5
  # CHECK-NEXT: mu: 2.0
  for line in head[:8]:
    print(line)

  back = read_flow_state(flow_path, domain)
  # CHECK: flow exact True True True
  print("flow exact",
        all(np.array_equal(a, b) for a, b in zip(back.u, state.u)),
        bool(np.array_equal(back.p, state.p)),
        all(np.array_equal(a, b) for a, b in zip(back.f, state.f)))
  # CHECK: mu 2.0 iterations True
  print("mu", back.mu, "iterations", back.iterations == state.iterations)

  # CHECK: resolution:
  other = perforate(square, 0.5, build_mac_grid(2, 32, 0.5, BOX))
  try:
    read_flow_state(flow_path, other)
  except ConfigurationError as e:
    print(str(e).split(" ")[0])

  cell_path = os.path.join(d, "cell.field")
  write_cell_solution(cell_path, cell)
  loaded = read_cell_solution(cell_path)
  # CHECK: cell exact True True
  print("cell exact", bool(np.array_equal(loaded.K, cell.K)),
        bool(np.array_equal(loaded.solid_unit, cell.solid_unit)))

  # CHECK: ValueError {{.*}}: expected a cell_solution field file (got kind 'flow_state')
  try:
    read_cell_solution(flow_path)
  except ValueError as e:
    print(type(e).__name__, e)

  # CHECK: ValueError {{.*}}: expected {{[0-9]+}} values (got {{[0-9]+}})
  with open(flow_path, "r", encoding="utf-8") as fp:
    lines = fp.read().splitlines()
  with open(flow_path, "w", encoding="utf-8") as fp:
    fp.write("\n".join(lines[:-1]) + "\n")
  try:
    read_flow_state(flow_path, domain)
  except ValueError as e:
    print(type(e).__name__, e)
