#!/usr/bin/which python
# Command line front end: solves cell and eps-problems, runs the sweep and
# the studies, and writes CSV files and the gated report.
#
# Exit codes: 0 success with every gate passing, 1 a gate failed, 2 error.

import argparse
import logging
import os
import sys

import yaml

from darcy_lab.discrete.errors import *
from darcy_lab.discrete.stokes import *
from darcy_lab.discrete.yaml_helper import *
from darcy_lab.experiments.config import *
from darcy_lab.experiments.report import *
from darcy_lab.experiments.studies import *
from darcy_lab.experiments.sweep import *
from darcy_lab.io.field_file import *

logger = logging.getLogger("darcy_lab.tools.lab")

SUBCOMMANDS = ("cell", "solve", "verify", "sweep", "compactness", "wkp",
               "report")

EXIT_OK = 0
EXIT_GATE_FAILED = 1
EXIT_ERROR = 2


def create_arg_parser() -> argparse.ArgumentParser:
  p = argparse.ArgumentParser(
      description="Homogenization lab for the eps-Stokes problem in "
      "perforated domains")
  p.add_argument("command",
                 metavar="COMMAND",
                 choices=SUBCOMMANDS,
                 help=f"One of: {', '.join(SUBCOMMANDS)}")
  p.add_argument("--config",
                 type=str,
                 dest="config",
                 required=True,
                 help="YAML experiment config")
  p.add_argument("--epsilon",
                 type=float,
                 dest="epsilon",
                 default=None,
                 help="Run a single eps (1/integer) instead of the config list")
  p.add_argument("--resolution",
                 type=int,
                 dest="resolution",
                 default=None,
                 help="Override geometry.cells_per_period")
  p.add_argument("--out",
                 type=str,
                 dest="out",
                 default=None,
                 help="Override output.directory")
  p.add_argument("-v",
                 "--verbose",
                 action="store_true",
                 dest="verbose",
                 help="Log at DEBUG level")
  return p


def _configure_logging(verbose: bool):
  logging.basicConfig(
      stream=sys.stderr,
      level=logging.DEBUG if verbose else logging.INFO,
      format="%(asctime)s :: %(levelname)s :: %(name)s :: %(message)s")


def _gate_exit(gates) -> int:
  for g in gates:
    logger.info("gate %d (%s): %s %s", g.number, g.title, g.status, g.detail)
  return EXIT_GATE_FAILED if any(g.failed for g in gates) else EXIT_OK


def _run_cell(config: ExperimentConfig, out: str) -> int:
  cell = solve_unit_cell(config)
  write_cell_solution(os.path.join(out, "cell.field"), cell)
  print(f"K = {cell.K.tolist()}")
  print(f"K_avg = {cell.K_avg.tolist()}")
  return EXIT_OK


def _run_solve(config: ExperimentConfig, out: str) -> int:
  epsilon = config.epsilons[0]
  state = solve_epsilon(config, epsilon)
  m = int(round(1.0 / epsilon))
  path = os.path.join(out, f"flow_eps{m}.field")
  write_flow_state(path, state)
  momentum, div = residual(state.system, state)
  print(f"eps = 1/{m}: {state.iterations} iterations, momentum residual "
        f"{momentum:.3e}, divergence {div:.3e}")
  return EXIT_OK


def _run_verify(config: ExperimentConfig, out: str) -> int:
  records = verification_suite(config)
  write_csv(os.path.join(out, "verify.csv"), records)
  gates = evaluate_gates(records)
  with open(os.path.join(out, "verify.md"), "w", encoding="utf-8") as f:
    f.write(render_report(gates, {"verify": records}))
  return _gate_exit(gates)


def _determinism_record(config: ExperimentConfig, out: str,
                        text: str) -> Record:
  """Compares a sweep CSV against the previous run of the same config."""
  csv_path = os.path.join(out, f"{config.experiment_id}.csv")
  config_path = os.path.join(out, f"{config.experiment_id}.yaml")
  config_text = yaml_dump(config.to_dict())
  same_config = False
  if os.path.exists(config_path) and os.path.exists(csv_path):
    with open(config_path, "r", encoding="utf-8") as f:
      same_config = f.read() == config_text
  if not same_config:
    with open(config_path, "w", encoding="utf-8") as f:
      f.write(config_text)
    return Record(config.experiment_id, "determinism", flag="not_asserted")
  with open(csv_path, "r", encoding="utf-8", newline="") as f:
    identical = f.read() == text
  return Record(config.experiment_id,
                "determinism",
                lhs=1.0 if identical else 0.0,
                rhs=1.0,
                ratio=1.0 if identical else 0.0)


def _run_sweep(config: ExperimentConfig, out: str) -> int:
  records = run_sweep(config)
  text = format_csv(records)
  determinism = _determinism_record(config, out, text)
  write_csv(os.path.join(out, "determinism.csv"), [determinism])
  write_csv(os.path.join(out, f"{config.experiment_id}.csv"), records)
  return _gate_exit(write_report(out))


def _run_study(config: ExperimentConfig, out: str, name: str, study) -> int:
  write_csv(os.path.join(out, f"{name}.csv"), study(config))
  return _gate_exit(write_report(out))


def main(args) -> int:
  _configure_logging(args.verbose)
  try:
    config = load_config(args.config).with_overrides(epsilon=args.epsilon,
                                                      resolution=args.resolution,
                                                      out=args.out)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    if args.command == "cell":
      return _run_cell(config, out)
    if args.command == "solve":
      return _run_solve(config, out)
    if args.command == "verify":
      return _run_verify(config, out)
    if args.command == "sweep":
      return _run_sweep(config, out)
    if args.command == "compactness":
      return _run_study(config, out, "compactness", compactness_study)
    if args.command == "wkp":
      return _run_study(config, out, "wkp", wkp_ratio_study)
    return _gate_exit(write_report(out))
  except (DarcyLabError, OSError, yaml.YAMLError, ValueError) as e:
    message = " ".join(str(e).split())
    print(f"error: {type(e).__name__}: {message}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
  sys.exit(main(create_arg_parser().parse_args()))
