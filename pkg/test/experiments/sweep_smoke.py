# RUN: %PYTHON %s | FileCheck %s

import os

from darcy_lab.experiments.config import *
from darcy_lab.experiments.report import *
from darcy_lab.experiments.sweep import *

config = ExperimentConfig.from_dict({
    "sweep": {
        "epsilons": [0.5, 0.25],
        "r_factors": [1, 1.5, 2],
    },
    "solver": {
        "tol": 1e-10
    },
    "output": {
        "experiment_id": "smoke"
    },
})

os.environ[THREADS_ENV] = "1"
records = run_sweep(config)
# CHECK: ids {'smoke'}
print("ids", {r.experiment_id for r in records})

# At eps = 1/4 only r = eps fits below R/4, and no boundary-layer delta is
# admissible on (-1, 1)^2.
# CHECK: divergence
# CHECK-NEXT: energy_balance
# CHECK-NEXT: pressure_estimate
# CHECK-NEXT: lipschitz 0.25
# CHECK-NEXT: average_bound 0.25
# CHECK-NEXT: excess 0.25
# CHECK-NEXT: excess_u 0.25
# CHECK-NEXT: excess_grad 0.25
# CHECK-NEXT: excess_p 0.25
# CHECK-NEXT: pressure_excess 0.25
# CHECK-NEXT: pressure_excess_frozen 0.25
# CHECK-NEXT: pressure_oscillation 0.25
# CHECK-NEXT: excess_u_rate insufficient_points
# CHECK-NEXT: excess_grad_rate insufficient_points
# CHECK-NEXT: caccioppoli
# CHECK-NEXT: caccioppoli_r_plus_eps
# CHECK-NEXT: reverse_holder
# CHECK-NEXT: reverse_holder
# CHECK-NEXT: poincare
# CHECK-NEXT: pressure_mean_drift
# CHECK-NEXT: boundary_layer_rate insufficient_points
# CHECK-NEXT: mean_property
for r in records:
  if r.epsilon != 0.25:
    continue
  fields = [r.quantity]
  if r.r is not None:
    fields.append(repr(r.r))
  if r.flag:
    fields.append(r.flag)
  print(" ".join(fields))

# Q_{R/4} is below the period at eps = 1/2.
# CHECK: coarse reverse_holder DomainTooSmall: R = 0.25 is below the period eps = 0.5
# CHECK: coarse reverse_holder DomainTooSmall
for r in records:
  if r.epsilon == 0.5 and r.quantity == "reverse_holder":
    print("coarse", r.quantity, r.flag)

# CHECK: gate 1 pass
print("gate 1", evaluate_gates(records)[0].status)

# The record order and every value are independent of the worker count.
os.environ[THREADS_ENV] = "2"
# CHECK: threads identical True
print("threads identical", format_csv(run_sweep(config)) == format_csv(records))
