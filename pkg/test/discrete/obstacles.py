# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.errors import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *

# CHECK: square solid 16 margin 2
square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
print("square solid", int(square.sum()), "margin", margin_cells(square))

# Two 6x2 bars sharing a 2x2 center.
# CHECK: cross solid 20 margin 1
cross = make_obstacle(ObstacleSpec("centered-cross", arm=0.25, length=0.75), 8)
print("cross solid", int(cross.sum()), "margin", margin_cells(cross))

# CHECK: ok True connected True
report = validate(cross)
print("ok", report.ok, "connected", report.connected)

# CHECK: SeparationViolation
try:
  make_obstacle(ObstacleSpec("centered-square", side=1.0), 8)
except SeparationViolation as e:
  print(type(e).__name__)

# A solid ring around voxel (2, 2) traps one fluid voxel.
ring = [(i, j) for i in (1, 2, 3) for j in (1, 2, 3) if (i, j) != (2, 2)]
# CHECK: ConnectivityViolation
try:
  make_obstacle(ObstacleSpec("voxel-list", voxels=ring), 6)
except ConnectivityViolation as e:
  print(type(e).__name__)
# CHECK: components 2
count, _ = fluid_components(~make_obstacle(
    ObstacleSpec("voxel-list", voxels=ring), 6, check=False),
                            periodic=True)
print("components", count)

# CHECK: voxels [(0, 1), (2, 3)]
print("voxels", ObstacleSpec.parse_voxel_text("0 1\n# comment\n2 3  # tail\n", 2))
# CHECK: geometry.voxel_file: line 1: expected 2 indices, got '0 1 2'
try:
  ObstacleSpec.parse_voxel_text("0 1 2\n", 2)
except ConfigurationError as e:
  print(e)

# eps = 1/2 on (-1, 1)^2 at 16 cells per unit: four copies of the square.
grid = build_mac_grid(2, 16, 1.0, BOX)
domain = perforate(square, 0.5, grid)
# CHECK: periods 2 period_cells 8 refine 1
print("periods", domain.periods, "period_cells", domain.period_cells, "refine",
      domain.refine)
# CHECK: solid cells 256 fluid fraction 0.75
print("solid cells", int((~domain.fluid_cells).sum()), "fluid fraction",
      domain.fluid_fraction)
# The lattice passes through the origin: copy z = -1 ends at cell 15.
# CHECK: copies [-2, -1, 0, 1]
print("copies", sorted(set(domain.copy_index().tolist())))
# CHECK: cell 15 copy -1 cell 16 copy 0
idx = domain.copy_index()
print("cell 15 copy", idx[15], "cell 16 copy", idx[16])

# Box boundary faces are closed.
# CHECK: boundary faces open False
print("boundary faces open", bool(domain.fluid_faces[0][0].any() or
                                  domain.fluid_faces[0][-1].any()))

# CHECK: domain ok True lattice_fluid True
report = validate(domain)
print("domain ok", report.ok, "lattice_fluid", report.lattice_fluid)

# CHECK: resolution: grid resolution 12 is not divisible by m * unit resolution = 2 * 8
try:
  perforate(square, 0.5, build_mac_grid(2, 12, 1.0, BOX))
except ConfigurationError as e:
  print(e)

# A side of 0.95 covers every voxel at n = 8; the report flags it.
wide = make_obstacle(ObstacleSpec("centered-square", side=0.95), 8, check=False)
report = validate(wide)
# CHECK: wide margin 0 margin_ok False ok False
# CHECK: wide violation separation margin 0 < 1 voxels
print("wide margin", report.margin_cells, "margin_ok", report.margin_ok, "ok",
      report.ok)
print("wide violation", report.violations[0])
