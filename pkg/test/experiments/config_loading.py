# RUN: %PYTHON %s | FileCheck %s

import math
import os
import tempfile

import numpy as np

from darcy_lab.discrete.errors import *
from darcy_lab.experiments.config import *

config = ExperimentConfig.from_dict({"sweep": {"epsilons": [0.25, 0.125]}})

# CHECK: ExperimentConfig(id=sweep, epsilons=[0.25, 0.125], cell_resolution=8)
print(config)
# CHECK: MacGrid(dim=2, n_per_unit=32, extent=1.0, topology=box)
# CHECK: MacGrid(dim=2, n_per_unit=16, extent=1.0, topology=box)
print(config.fine_grid(0.25))
print(config.darcy_grid())
# CHECK: deltas [(2.0, True), (4.0, True), (0.125, False), (0.25, False), (0.5, False)]
print("deltas", config.deltas())
# CHECK: reverse holder radius 0.25
print("reverse holder radius", config.reverse_holder_radius)
# The default forcing is not a gradient and does not vanish at the origin.
# CHECK: f(0) True
print("f(0)", bool(np.allclose(config.forcing().at_origin(),
                               [math.sin(0.5), 0.5 * math.sin(0.5)])))
# CHECK: solid voxels 16
print("solid voxels", int(config.unit_mask().sum()))

# CHECK: parse_delta (0.5, True) (1.0, True) (0.25, False)
print("parse_delta", parse_delta("0.5eps"), parse_delta("eps"),
      parse_delta(0.25))

# Overrides revalidate.
# CHECK: overridden [0.5] 16 elsewhere
other = config.with_overrides(epsilon=0.5, resolution=16, out="elsewhere")
print("overridden", other.epsilons, other.cell_resolution, other.output_dir)

for bad in (
    {"sweep": {"epsilons": [0.3]}},
    {"sweep": {"epsilons": [0.125, 0.25]}},
    {"sweep": {"epsilons": [0.25], "extent": 0.3}},
    {"sweep": {"epsilons": [0.25], "reverse_holder_q": [2]}},
    {"sweep": {"epsilons": [0.25]}, "solver": {"inner": "gmres"}},
    {"sweep": {"epsilons": [0.25]}, "geometry": {"side": 1.0}},
    {"sweep": {"epsilons": [0.25]}, "plots": {}},
    {"sweep": {"epsilons": [0.25]}, "output": {"experiment_id": "a b"}},
):
  try:
    ExperimentConfig.from_dict(bad)
    print("accepted", bad)
  except ConfigurationError as e:
    print(type(e).__name__, e)
# CHECK: ConfigurationError sweep.epsilons: epsilon 0.3 is not the reciprocal of an integer
# CHECK: ConfigurationError sweep.epsilons: epsilons must strictly decrease (got [0.125, 0.25])
# CHECK: ConfigurationError sweep.extent: extent 0.3 is not a whole number of periods 0.25
# CHECK: ConfigurationError sweep.reverse_holder_q: 2.0 is out of range
# CHECK: ConfigurationError solver.inner: expected 'direct' or 'cg' (got 'gmres')
# CHECK: SeparationViolation geometry:
# CHECK: ConfigurationError plots: unknown section
# CHECK: ConfigurationError output.experiment_id: experiment_id 'a b' must match
# CHECK-NOT: accepted

# A YAML file with a voxel list read relative to the config.
with tempfile.TemporaryDirectory() as d:
  with open(os.path.join(d, "voxels.txt"), "w") as f:
    f.write("# the four center voxels\n3 3\n3 4\n4 3\n4 4\n")
  with open(os.path.join(d, "lab.yaml"), "w") as f:
    f.write("seed: 7\n"
            "geometry:\n"
            "  shape: voxel-list\n"
            "  voxel_file: voxels.txt\n"
            "forcing:\n"
            "  family: constant\n"
            "  value: [1.0, 0.5]\n"
            "sweep:\n"
            "  epsilons: [0.5, 0.25]\n")
  loaded = load_config(os.path.join(d, "lab.yaml"))
  # CHECK: loaded seed 7 solid 4 f(0) [1.0, 0.5]
  print("loaded seed", loaded.seed, "solid", int(loaded.unit_mask().sum()),
        "f(0)", loaded.forcing().at_origin().tolist())
