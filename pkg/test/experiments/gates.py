# RUN: %PYTHON %s | FileCheck %s

import os
import tempfile

from darcy_lab.discrete.errors import *
from darcy_lab.discrete.regularity import *
from darcy_lab.experiments.report import *

records = [
    Record("demo", "oracle_u", epsilon=0.5, lhs=1e-12, rhs=1e-10, ratio=0.01),
    Record("demo", "divergence", epsilon=0.5, lhs=1e-9, rhs=1e-8, ratio=0.1),
    Record.of("demo", 0.25, Measurement.of("lipschitz", 0.4, 1.0, r=0.25)),
    Record.of("demo", 0.125, Measurement.of("lipschitz", 0.5, 1.0, r=0.125)),
    Record("demo", "mean_property", epsilon=0.25, lhs=1e-15, rhs=1e-13),
    Record("demo", "excess_u_rate", epsilon=0.25, slope=0.2, r2=0.95),
    Record("demo", "excess_u_rate", epsilon=0.125, slope=0.5, r2=0.95),
    Record("demo", "excess_grad_rate", epsilon=0.25, slope=0.6, r2=0.9),
    Record("demo", "excess_grad_rate", epsilon=0.125, slope=0.7, r2=0.9),
    Record("demo", "boundary_layer_rate", epsilon=0.25,
           flag="insufficient_points"),
    Record.failed("demo", 0.25, "caccioppoli",
                  DomainTooSmall("R = 0.1 is below 2 eps = 0.5"), R=0.1),
    Record("demo", "determinism", flag="not_asserted"),
]

# CHECK: 1 pass 2 rows
# CHECK: 2 no data
# CHECK: 3 no data
# CHECK: 4 pass 1 rows
# CHECK: 5 pass 2 rows
# CHECK: 6 fail 1 of 4 rows fit a slope below 0.3 or R^2 below 0.8
# CHECK: 7 fail 1 rows failed: DomainTooSmall: R = 0.1 is below 2 eps = 0.5
# CHECK: 8 no data
# CHECK: 9 no data
# CHECK: 10 no data
# CHECK: 11 no data
# CHECK: 12 no data
gates = evaluate_gates(records)
for g in gates:
  print(g.number, g.status, g.detail)

# Uniformity fails once the per-eps maxima drift apart by 2x.
drift = [
    Record.of("demo", 0.25, Measurement.of("lipschitz", 0.2, 1.0)),
    Record.of("demo", 0.125, Measurement.of("lipschitz", 0.5, 1.0)),
]
# CHECK: lipschitz drift fail
print("lipschitz drift", evaluate_gates(drift)[4].status)

# 0/0 measurements are values, not failed rows.
still = [
    Record.of("demo", 0.25, Measurement.of("lipschitz", 0.0, 0.0)),
    Record.of("demo", 0.125, Measurement.of("lipschitz", 0.0, 0.0)),
]
# CHECK: zero_over_zero pass 2 rows
print(ZERO_OVER_ZERO, evaluate_gates(still)[4].status,
      evaluate_gates(still)[4].detail)
# CHECK: zero_rhs fail 2 rows failed: zero_rhs
unbounded = [
    Record.of("demo", 0.25, Measurement.of("lipschitz", 1.0, 0.0)),
    Record.of("demo", 0.125, Measurement.of("lipschitz", 1.0, 0.0)),
]
print(ZERO_RHS, evaluate_gates(unbounded)[4].status,
      evaluate_gates(unbounded)[4].detail)

# Excess exponents must agree across eps, and need fits at two eps at least.
def excess_rates(u_slopes, grad_slopes):
  return [
      Record("demo", quantity, epsilon=eps, slope=s, r2=0.9)
      for quantity, slopes in (("excess_u_rate", u_slopes),
                               ("excess_grad_rate", grad_slopes))
      for eps, s in zip((0.125, 0.0625), slopes)
  ]


# CHECK: excess stable pass 4 rows
g = evaluate_gates(excess_rates([0.5, 0.6], [0.7, 0.8]))[5]
print("excess stable", g.status, g.detail)
# CHECK: excess drift fail excess_u_rate slopes {0.125: 0.4, 0.0625: 0.9} vary by 2.25x (need < 2x)
g = evaluate_gates(excess_rates([0.4, 0.9], [0.7, 0.8]))[5]
print("excess drift", g.status, g.detail)
# CHECK: excess single no data excess_grad_rate fitted at 1 eps
g = evaluate_gates(excess_rates([0.5, 0.6], [0.7]))[5]
print("excess single", g.status, g.detail)

# The compactness errors must shrink with eps.
compactness = [
    Record("demo", "compactness_u", epsilon=0.25, lhs=0.2),
    Record("demo", "compactness_u", epsilon=0.125, lhs=0.1),
    Record("demo", "compactness_p", epsilon=0.25, lhs=0.3),
    Record("demo", "compactness_p", epsilon=0.125, lhs=0.35),
]
# CHECK: compactness fail compactness_p does not strictly decrease
g = evaluate_gates(compactness)[8]
print("compactness", g.status, g.detail.split(":")[0])

# Permeability consistency passes at solver level without a decrease.
permeability = [
    Record("demo", "K_asymmetry", lhs=0.0, rhs=1.0, ratio=0.0),
    Record("demo", "K_cholesky", lhs=1.0, rhs=1.0, ratio=1.0),
    Record("demo", "K_refinement", lhs=1e-9, rhs=2e-9, ratio=0.5),
]
# CHECK: permeability pass
print("permeability", evaluate_gates(permeability)[1].status)

# CHECK: experiment_id,epsilon,quantity,r,R,delta,q,lhs,rhs,ratio,slope,r2,flag
# CHECK-NEXT: demo,0.25,lipschitz,0.25,,,,0.4,1.0,0.4,,,
print(format_csv(records[2:3]), end="")

# Gates recomputed from the CSV files agree with the in-memory ones.
with tempfile.TemporaryDirectory() as out:
  write_csv(os.path.join(out, "demo.csv"), records)
  reread = read_records(os.path.join(out, "demo.csv"))
  # CHECK: reread 12 True
  print("reread", len(reread),
        [g.status for g in evaluate_gates(reread)] ==
        [g.status for g in gates])
  # CHECK: report # darcy_lab report
  from_disk = write_report(out)
  with open(os.path.join(out, "report.md"), "r", encoding="utf-8") as f:
    print("report", f.readline().strip())
  # CHECK: failed gates [6, 7]
  print("failed gates", [g.number for g in from_disk if g.failed])
