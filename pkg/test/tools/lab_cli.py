# RUN: %PYTHON %s | FileCheck %s
# RUN: not %PYTHON -m darcy_lab.tools.lab cell --config %S/no_such_config.yaml

import os
import tempfile

from darcy_lab.experiments.report import *
from darcy_lab.tools import lab


def run(*argv):
  return lab.main(lab.create_arg_parser().parse_args(list(argv)))


with tempfile.TemporaryDirectory() as d:
  out = os.path.join(d, "out")
  config = os.path.join(d, "lab.yaml")
  with open(config, "w", encoding="utf-8") as f:
    f.write("sweep:\n"
            "  epsilons: [0.5, 0.25]\n"
            "  r_factors: [1, 1.5, 2]\n"
            "  cell_resolutions: [8, 16]\n"
            "solver:\n"
            "  tol: 1.0e-10\n"
            "output:\n"
            "  experiment_id: cli\n")
  still = os.path.join(d, "still.yaml")
  with open(still, "w", encoding="utf-8") as f:
    f.write("forcing:\n"
            "  family: constant\n"
            "  value: [0.0, 0.0]\n"
            "sweep:\n"
            "  epsilons: [0.5, 0.25]\n"
            "  cell_resolutions: [8, 16]\n"
            "output:\n"
            "  experiment_id: still\n")
  broken = os.path.join(d, "broken.yaml")
  with open(broken, "w", encoding="utf-8") as f:
    f.write("sweep:\n  epsilons: [0.5]\n  colour: red\n")

  # CHECK: missing config 2
  print("missing config", run("cell", "--config", os.path.join(d, "none.yaml")))
  # CHECK: unknown key 2
  print("unknown key", run("cell", "--config", broken))

  # CHECK: K = {{\[\[.*\]\]}}
  # CHECK: K_avg = {{\[\[.*\]\]}}
  # CHECK: cell 0 True
  code = run("cell", "--config", config, "--out", out)
  print("cell", code, os.path.exists(os.path.join(out, "cell.field")))

  # CHECK: eps = 1/2: {{[0-9]+}} iterations
  # CHECK: solve 0 True
  code = run("solve", "--config", config, "--out", out, "--epsilon", "0.5")
  print("solve", code, os.path.exists(os.path.join(out, "flow_eps2.field")))

  # Zero forcing passes every gate the verification suite feeds.
  # CHECK: verify 0
  code = run("verify", "--config", still, "--out", out)
  print("verify", code)
  gates = evaluate_gates(read_records(os.path.join(out, "verify.csv")))
  # CHECK: 1 pass
  # CHECK: 2 pass
  # CHECK: 3 pass
  # CHECK: 4 pass
  # CHECK: 11 pass
  # CHECK: 12 no data
  for g in gates:
    if g.number in (1, 2, 3, 4, 11, 12):
      print(g.number, g.status)

  # The first sweep records its config; the rerun compares the CSV bytes.
  # CHECK: first sweep True not_asserted
  code = run("sweep", "--config", config, "--out", out)
  first = read_records(os.path.join(out, "determinism.csv"))
  print("first sweep", code in (lab.EXIT_OK, lab.EXIT_GATE_FAILED),
        first[0].flag)
  # CHECK: second sweep 1.0
  run("sweep", "--config", config, "--out", out)
  second = read_records(os.path.join(out, "determinism.csv"))
  print("second sweep", second[0].lhs)

  # CHECK: report files ['cli.csv', 'determinism.csv', 'verify.csv']
  # CHECK: report gate 12 pass
  code = run("report", "--config", config, "--out", out)
  print("report files", sorted(n for n in os.listdir(out) if n.endswith(".csv")))
  gates = write_report(out)
  print("report gate 12", gates[11].status)
