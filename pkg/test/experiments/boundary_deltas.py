# RUN: %PYTHON %s | FileCheck %s

import os

from darcy_lab.experiments.config import *
from darcy_lab.experiments.sweep import *
from darcy_lab.experiments.sweep import _Collector, _delta_values

SAMPLES = os.path.join(os.path.dirname(__file__), "..", "..", "samples")

# At eps = 1/12 on (-1, 1)^2 the rescaled eps is 1/4, so "2eps" lands on the
# absolute 0.5 and is listed once.
twelfth = ExperimentConfig.from_dict({
    "geometry": {
        "cells_per_period": 4
    },
    "sweep": {
        "epsilons": [1 / 12],
        "cell_resolutions": [4, 8],
    },
    "output": {
        "experiment_id": "twelfth"
    },
})
# CHECK: deltas [(0.5, True), (1.0, True), (0.125, False), (0.25, False)]
print("deltas", _delta_values(twelfth, 1 / 12))

# Every eps of the acceptance sweep keeps at least three admissible deltas.
acceptance = load_config(os.path.join(SAMPLES, "acceptance.yaml"))
# CHECK: admissible [3, 6, 8]
print("admissible", [
    sum(ok for _, ok in _delta_values(acceptance, eps))
    for eps in acceptance.epsilons
])

# A fit that cannot be made becomes a flagged row.
out = _Collector("demo", 0.25)
out.fit("boundary_layer_rate", [(1.0, 1.0), (0.5, 0.7), (0.5, 0.6)])
# CHECK: boundary_layer_rate ValueError: scales must be distinct (got [1.0, 0.5, 0.5])
print(out.records[0].quantity, out.records[0].flag)

# The whole sweep runs through at eps = 1/12.
records = run_sweep(twelfth)
# CHECK: boundary_layer [0.5, 1.0]
print("boundary_layer",
      [r.delta for r in records if r.quantity == "boundary_layer"])
# CHECK: boundary_layer_rate insufficient_points
print("boundary_layer_rate",
      [r.flag for r in records if r.quantity == "boundary_layer_rate"][0])
# CHECK: mean_property 1
print("mean_property", sum(r.quantity == "mean_property" for r in records))
