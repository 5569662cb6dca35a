# RUN: %PYTHON %s | FileCheck %s

import numpy as np

from darcy_lab.discrete.extension import *
from darcy_lab.discrete.geometry import *
from darcy_lab.discrete.grid import *

square = make_obstacle(ObstacleSpec("centered-square", side=0.5), 8)
rng = np.random.default_rng(11)

grid = build_mac_grid(2, 16, 1.0, BOX)
domain = perforate(square, 0.5, grid)
p = np.where(domain.fluid_cells, rng.standard_normal(grid.cell_shape), 0.0)
ext = extend_pressure(p, domain)

# CHECK: PressureExtension(interior_copies=16, excluded_cells=0)
print(ext)
# CHECK: fluid unchanged True
print("fluid unchanged",
      bool(np.array_equal(ext.values[domain.fluid_cells], p[domain.fluid_cells])))
# Inside the copy holding the origin the obstacle carries the fluid mean.
# CHECK: obstacle value True
copy = (slice(16, 24),) * 2
fluid_mean = p[copy][domain.fluid_cells[copy]].mean()
print("obstacle value", bool(np.allclose(ext.values[copy][~domain.fluid_cells[copy]],
                                         fluid_mean, rtol=0, atol=1e-14)))

# CHECK: asserted True holds True
check = check_mean_property(ext, p, domain)
print("asserted", check.asserted, "holds", check.holds)
# CHECK: copy means True
print("copy means", check_copy_means(ext, p, domain) < 1e-13)

# R = 3/4 cuts the outer copies; their solid cells are left out.
cut = perforate(square, 0.5, build_mac_grid(2, 16, 0.75, BOX))
q = np.where(cut.fluid_cells, rng.standard_normal(cut.grid.cell_shape), 0.0)
cut_ext = extend_pressure(q, cut)
# CHECK: interior copies 4 excluded True
print("interior copies", int(cut_ext.interior.sum()), "excluded",
      bool(cut_ext.excluded.any()))
# CHECK: asserted False holds False
check = check_mean_property(cut_ext, q, cut)
print("asserted", check.asserted, "holds", check.holds)

# CHECK: extended velocity 0.0
u = [rng.standard_normal(s) for s in grid.face_shapes]
v = extend_velocity(u, domain)
print("extended velocity", float(np.max(np.abs(v[1][~domain.fluid_faces[1]]))))
