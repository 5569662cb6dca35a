"""Walks one eps through the pipeline: cell problem, eps-problem, Darcy
problem, two-scale approximation and the large-scale Lipschitz ratio.

  PYTHONPATH=. python samples/two_scale_walkthrough.py samples/smoke.yaml
"""

import sys

import numpy as np

from darcy_lab.discrete.darcy import *
from darcy_lab.discrete.errors import *
from darcy_lab.discrete.regularity import *
from darcy_lab.experiments.config import *
from darcy_lab.experiments.sweep import *


def relative_l2(a, b) -> float:
  num = sum(float(np.sum((x - y)**2)) for x, y in zip(a, b))
  den = sum(float(np.sum(y**2)) for y in b)
  return (num / den)**0.5 if den else 0.0


def main(path: str):
  config = load_config(path)
  cell = solve_unit_cell(config)
  print(f"K = {np.round(cell.K, 6).tolist()}")

  darcy = solve_homogenized(cell.K, config.mu, config.forcing(),
                            config.darcy_grid())
  print(f"Darcy: {darcy.iterations} CG iterations")

  for epsilon in config.epsilons:
    state = solve_epsilon(config, epsilon)
    approx = first_order_approx(cell, darcy, epsilon, state.grid,
                                mu=config.mu)
    print(f"eps = {epsilon}: {state.iterations} Uzawa iterations, "
          f"two-scale error {relative_l2(state.u, approx):.3e}")
    try:
      lip = lipschitz_quantity(state, config.forcing(), epsilon,
                               alpha=config.alpha)
      print(f"  Lipschitz ratio at r = eps: {lip.ratio:.3f}")
    except DarcyLabError as e:
      print(f"  no Lipschitz ratio: {e}")


if __name__ == "__main__":
  main(sys.argv[1] if len(sys.argv) > 1 else "samples/smoke.yaml")
