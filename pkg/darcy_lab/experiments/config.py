"""Experiment configuration: a YAML mapping with the sections geometry,
forcing, sweep, solver and output (plus an optional top-level seed).

Every key is validated on load; unknown keys and bad values raise
ConfigurationError naming the offending key.

  >>> c = ExperimentConfig.from_dict({"sweep": {"epsilons": [0.25, 0.125]}})
  >>> c.epsilons
  [0.25, 0.125]
  >>> c.period_multiples
  [4, 8]
  >>> ExperimentConfig.from_dict({"sweep": {"epsilon": [0.5]}})
  Traceback (most recent call last):
  ...
  darcy_lab.discrete.errors.ConfigurationError: sweep.epsilon: unknown key
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple
import copy
import logging
import math
import os
import re

import numpy as np

from ..discrete.errors import *
from ..discrete.forcing import *
from ..discrete.geometry import *
from ..discrete.grid import *
from ..discrete.yaml_helper import *

__all__ = [
    "DEFAULTS",
    "ExperimentConfig",
    "load_config",
    "parse_delta",
]

logger = logging.getLogger(__name__)

DEFAULTS = {
    "geometry": {
        "shape": "centered-square",
        "side": 0.5,
        "arm": 0.25,
        "length": 0.75,
        "voxels": None,
        "voxel_file": None,
        "cells_per_period": 8,
        "refine": 1,
        "dim": 2,
        "margin_min": 1,
    },
    "forcing": {
        "family": "trig",
        "value": None,
        "offset": None,
        "matrix": None,
        "terms": None,
        "alpha": 0.9,
        "div_amplitude": 0.5,
        "div_wavenumber": 1,
    },
    "sweep": {
        "epsilons": None,
        "extent": 1.0,
        "mu": 1.0,
        "r_factors": [1, 1.5, 2, 3, 4],
        "caccioppoli_radii": [2, 4],
        "reverse_holder_q": [3, 4],
        "reverse_holder_radius": None,
        "deltas": ["2eps", "4eps", 0.125, 0.25, 0.5],
        "poincare_q": [2],
        "wkp_q": [1.5, 2, 4],
        "darcy_resolution": 32,
        "cell_resolutions": [16, 32],
        "inner_fraction": 0.5,
    },
    "solver": {
        "tol": 1e-8,
        "max_iter": None,
        "inner": "direct",
        "oracle_max_dofs": 20000,
    },
    "output": {
        "directory": "out",
        "experiment_id": "sweep",
    },
}  # type: Dict[str, Dict[str, Any]]

_DELTA_RE = re.compile(r"^\s*([0-9.eE+-]*)\s*eps\s*$")
_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def parse_delta(value: Any) -> Tuple[float, bool]:
  """(factor, in_units_of_eps) for a delta entry such as 0.25 or "2eps"."""
  if isinstance(value, str):
    m = _DELTA_RE.match(value)
    if not m:
      raise ConfigurationError(f"delta {value!r} is neither a number nor "
                               f"'<k>eps'",
                               key="sweep.deltas")
    factor = float(m.group(1)) if m.group(1) else 1.0
    return factor, True
  if isinstance(value, bool) or not isinstance(value, (int, float)):
    raise ConfigurationError(f"delta {value!r} is not a number",
                             key="sweep.deltas")
  return float(value), False


def _number(section: str, key: str, value: Any, low: float = -math.inf,
            high: float = math.inf, low_open: bool = True) -> float:
  if isinstance(value, bool) or not isinstance(value, (int, float)):
    raise ConfigurationError(f"expected a number (got {value!r})",
                             key=f"{section}.{key}")
  value = float(value)
  if (value <= low if low_open else value < low) or value > high:
    raise ConfigurationError(f"{value} is out of range", key=f"{section}.{key}")
  return value


def _integer(section: str, key: str, value: Any, low: int = 1) -> int:
  if isinstance(value, bool) or not isinstance(value, int) or value < low:
    raise ConfigurationError(f"expected an integer >= {low} (got {value!r})",
                             key=f"{section}.{key}")
  return value


def _numbers(section: str, key: str, value: Any, **kwargs) -> List[float]:
  if not isinstance(value, (list, tuple)) or not value:
    raise ConfigurationError(f"expected a non-empty list (got {value!r})",
                             key=f"{section}.{key}")
  return [_number(section, key, v, **kwargs) for v in value]


def _reciprocal_integer(eps: float) -> int:
  m = round(1.0 / eps)
  if m < 1 or abs(1.0 / eps - m) > 1e-9 * m:
    raise ConfigurationError(f"epsilon {eps} is not the reciprocal of an "
                             f"integer",
                             key="sweep.epsilons")
  return int(m)


def _trig_terms(raw: Any, dim: int) -> List[List[TrigTerm]]:
  if not isinstance(raw, list) or len(raw) != dim:
    raise ConfigurationError(f"expected {dim} lists of terms",
                             key="forcing.terms")
  terms = []
  for row in raw:
    if not isinstance(row, list):
      raise ConfigurationError(f"expected a list of terms (got {row!r})",
                               key="forcing.terms")
    parsed = []
    for t in row:
      if not isinstance(t, dict) or set(t) - {"amplitude", "wavevector",
                                              "phase"}:
        raise ConfigurationError(f"bad trig term {t!r}", key="forcing.terms")
      wavevector = t.get("wavevector", [0.0] * dim)
      if len(wavevector) != dim:
        raise ConfigurationError(f"wavevector {wavevector} is not {dim}-d",
                                 key="forcing.terms")
      parsed.append(
          TrigTerm(t.get("amplitude", 1.0), wavevector, t.get("phase", 0.0)))
    terms.append(parsed)
  return terms


def _default_trig(dim: int) -> List[List[TrigTerm]]:
  """A non-gradient field with f(0) != 0: f_a = sin(pi x_{a+1} / 2 + 1/2)."""
  terms = []
  for a in range(dim):
    k = [0.0] * dim
    k[(a + 1) % dim] = 0.5
    terms.append([TrigTerm(1.0 / (a + 1), k, 0.5)])
  return terms


class ExperimentConfig:
  """Validated experiment configuration with the derived objects it names."""

  def __init__(self, sections: Dict[str, Dict[str, Any]], seed: int,
               base_dir: str):
    self.sections = sections
    self.seed = seed
    self.base_dir = base_dir
    self._validate()

  @classmethod
  def from_dict(cls,
                data: Optional[Dict[str, Any]],
                base_dir: str = ".") -> "ExperimentConfig":
    data = {} if data is None else data
    if not isinstance(data, dict):
      raise ConfigurationError(f"expected a mapping at the top level (got "
                               f"{type(data).__name__})")
    sections = copy.deepcopy(DEFAULTS)
    seed = 0
    for name, body in data.items():
      if name == "seed":
        seed = _integer("", "seed", body, low=0)
        continue
      if name not in sections:
        raise ConfigurationError("unknown section", key=str(name))
      if body is None:
        continue
      if not isinstance(body, dict):
        raise ConfigurationError("expected a mapping", key=str(name))
      for key, value in body.items():
        if key not in sections[name]:
          raise ConfigurationError("unknown key", key=f"{name}.{key}")
        sections[name][key] = value
    return cls(sections, seed, base_dir)

  def to_dict(self) -> Dict[str, Any]:
    d = copy.deepcopy(self.sections)  # type: Dict[str, Any]
    d["seed"] = self.seed
    return d

  def with_overrides(self,
                     epsilon: Optional[float] = None,
                     resolution: Optional[int] = None,
                     out: Optional[str] = None) -> "ExperimentConfig":
    """A revalidated copy with the command-line overrides applied."""
    sections = copy.deepcopy(self.sections)
    if epsilon is not None:
      sections["sweep"]["epsilons"] = [epsilon]
    if resolution is not None:
      sections["geometry"]["cells_per_period"] = resolution
    if out is not None:
      sections["output"]["directory"] = out
    return ExperimentConfig(sections, self.seed, self.base_dir)

  # Section access.

  @property
  def geometry(self) -> Dict[str, Any]:
    return self.sections["geometry"]

  @property
  def forcing_section(self) -> Dict[str, Any]:
    return self.sections["forcing"]

  @property
  def sweep(self) -> Dict[str, Any]:
    return self.sections["sweep"]

  @property
  def solver(self) -> Dict[str, Any]:
    return self.sections["solver"]

  @property
  def output(self) -> Dict[str, Any]:
    return self.sections["output"]

  @property
  def dim(self) -> int:
    return self.geometry["dim"]

  @property
  def epsilons(self) -> List[float]:
    return list(self.sweep["epsilons"])

  @property
  def period_multiples(self) -> List[int]:
    return [_reciprocal_integer(e) for e in self.epsilons]

  @property
  def extent(self) -> float:
    return self.sweep["extent"]

  @property
  def mu(self) -> float:
    return self.sweep["mu"]

  @property
  def alpha(self) -> float:
    return self.forcing_section["alpha"]

  @property
  def tol(self) -> float:
    return self.solver["tol"]

  @property
  def inner(self) -> str:
    return self.solver["inner"]

  @property
  def cell_resolution(self) -> int:
    """Grid cells per period, also the cell-problem resolution."""
    return self.geometry["cells_per_period"] * self.geometry["refine"]

  @property
  def experiment_id(self) -> str:
    return self.output["experiment_id"]

  @property
  def output_dir(self) -> str:
    return self.output["directory"]

  @property
  def reverse_holder_radius(self) -> float:
    r = self.sweep["reverse_holder_radius"]
    return self.extent / 4 if r is None else r

  def deltas(self) -> List[Tuple[float, bool]]:
    return [parse_delta(d) for d in self.sweep["deltas"]]

  # Derived objects.

  def obstacle_spec(self) -> ObstacleSpec:
    g = self.geometry
    voxels = g["voxels"]
    if g["voxel_file"] is not None:
      path = os.path.join(self.base_dir, g["voxel_file"])
      with open(path, "r", encoding="utf-8") as f:
        voxels = ObstacleSpec.parse_voxel_text(f.read(), g["dim"])
    return ObstacleSpec(g["shape"],
                        side=g["side"],
                        arm=g["arm"],
                        length=g["length"],
                        voxels=voxels,
                        dim=g["dim"])

  def unit_mask(self) -> np.ndarray:
    """The validated unit-cell solid mask at cells_per_period voxels."""
    g = self.geometry
    return make_obstacle(self.obstacle_spec(),
                         g["cells_per_period"],
                         margin_min=g["margin_min"])

  def forcing(self) -> Forcing:
    f = self.forcing_section
    dim = self.dim
    family = f["family"]
    if family == "constant":
      return Forcing.constant(f["value"] if f["value"] is not None else
                              [1.0] + [0.0] * (dim - 1))
    if family == "affine":
      return Forcing.affine(
          f["offset"] if f["offset"] is not None else [0.0] * dim,
          f["matrix"] if f["matrix"] is not None else np.zeros((dim, dim)))
    if family == "trig":
      terms = (_default_trig(dim)
               if f["terms"] is None else _trig_terms(f["terms"], dim))
      return Forcing.trig(terms)
    raise ConfigurationError(
        f"forcing family must be one of {FAMILIES} (got {family!r})",
        key="forcing.family")

  def matrix_forcing(self) -> MatrixForcing:
    f = self.forcing_section
    return MatrixForcing(self.dim, f["div_amplitude"], f["div_wavenumber"],
                         self.extent)

  def fine_grid(self, epsilon: float, topology: str = BOX) -> MacGrid:
    """The grid over (-R, R)^d resolving period eps with cell_resolution
    cells."""
    m = _reciprocal_integer(epsilon)
    return build_mac_grid(self.dim, self.cell_resolution * m, self.extent,
                          topology)

  def darcy_grid(self) -> MacGrid:
    n = self.sweep["darcy_resolution"]
    return build_mac_grid(self.dim, int(round(n / (2 * self.extent))),
                          self.extent, BOX)

  # Validation.

  def _validate(self):
    g = self.geometry
    _integer("geometry", "dim", g["dim"], low=2)
    if g["dim"] > 3:
      raise ConfigurationError(f"dimension must be 2 or 3 (got {g['dim']})",
                               key="geometry.dim")
    _integer("geometry", "cells_per_period", g["cells_per_period"], low=2)
    _integer("geometry", "refine", g["refine"])
    _integer("geometry", "margin_min", g["margin_min"], low=0)
    if self.cell_resolution % 2:
      raise ConfigurationError(
          f"cells_per_period * refine must be even (got "
          f"{self.cell_resolution})",
          key="geometry.cells_per_period")
    for key in ("side", "arm", "length"):
      _number("geometry", key, g[key], low=0.0, high=1.0)
    if g["voxels"] is not None and g["voxel_file"] is not None:
      raise ConfigurationError("give voxels or voxel_file, not both",
                               key="geometry.voxel_file")
    self.unit_mask()

    f = self.forcing_section
    _number("forcing", "alpha", f["alpha"], low=0.0, high=1.0)
    _number("forcing", "div_amplitude", f["div_amplitude"])
    _integer("forcing", "div_wavenumber", f["div_wavenumber"])
    self.forcing()

    s = self.sweep
    if s["epsilons"] is None or not isinstance(s["epsilons"],
                                              list) or not s["epsilons"]:
      raise ConfigurationError("expected a non-empty list of epsilons",
                               key="sweep.epsilons")
    eps = _numbers("sweep", "epsilons", s["epsilons"], low=0.0, high=1.0)
    if any(b >= a for a, b in zip(eps, eps[1:])):
      raise ConfigurationError(f"epsilons must strictly decrease (got {eps})",
                               key="sweep.epsilons")
    s["epsilons"] = eps
    for e in eps:
      m = _reciprocal_integer(e)
      periods = _number("sweep", "extent", s["extent"], low=0.0) * m
      if abs(periods - round(periods)) > 1e-9 * periods:
        raise ConfigurationError(
            f"extent {s['extent']} is not a whole number of periods "
            f"{e}",
            key="sweep.extent")
    _number("sweep", "mu", s["mu"], low=0.0)
    _numbers("sweep", "r_factors", s["r_factors"], low=0.0)
    _numbers("sweep", "caccioppoli_radii", s["caccioppoli_radii"], low=0.0)
    _numbers("sweep", "reverse_holder_q", s["reverse_holder_q"], low=2.0)
    if s["reverse_holder_radius"] is not None:
      _number("sweep", "reverse_holder_radius", s["reverse_holder_radius"],
              low=0.0)
    if not isinstance(s["deltas"], list) or not s["deltas"]:
      raise ConfigurationError("expected a non-empty list",
                               key="sweep.deltas")
    for d in s["deltas"]:
      factor, _ = parse_delta(d)
      if not 0 < factor:
        raise ConfigurationError(f"delta {d!r} must be positive",
                                 key="sweep.deltas")
    _numbers("sweep", "poincare_q", s["poincare_q"], low=1.0, low_open=False)
    _numbers("sweep", "wkp_q", s["wkp_q"], low=1.0)
    n = _integer("sweep", "darcy_resolution", s["darcy_resolution"], low=4)
    cells = n / (2 * s["extent"])
    if abs(cells - round(cells)) > 1e-9 * cells or round(cells) < 2:
      raise ConfigurationError(
          f"darcy_resolution {n} does not give a whole number of cells per "
          f"unit over (-{s['extent']}, {s['extent']})",
          key="sweep.darcy_resolution")
    if not isinstance(s["cell_resolutions"], list) or not s["cell_resolutions"]:
      raise ConfigurationError("expected a non-empty list",
                               key="sweep.cell_resolutions")
    for res in s["cell_resolutions"]:
      _integer("sweep", "cell_resolutions", res, low=2)
      if res % g["cells_per_period"] or res % 2:
        raise ConfigurationError(
            f"cell resolution {res} must be an even multiple of "
            f"cells_per_period {g['cells_per_period']}",
            key="sweep.cell_resolutions")
    _number("sweep", "inner_fraction", s["inner_fraction"], low=0.0, high=1.0)

    v = self.solver
    _number("solver", "tol", v["tol"], low=0.0)
    if v["max_iter"] is not None:
      _integer("solver", "max_iter", v["max_iter"])
    if v["inner"] not in ("direct", "cg"):
      raise ConfigurationError(
          f"expected 'direct' or 'cg' (got {v['inner']!r})",
          key="solver.inner")
    _integer("solver", "oracle_max_dofs", v["oracle_max_dofs"])

    o = self.output
    if not isinstance(o["directory"], str) or not o["directory"]:
      raise ConfigurationError("expected a directory name",
                               key="output.directory")
    if not isinstance(o["experiment_id"], str) or not _ID_RE.match(
        o["experiment_id"]):
      raise ConfigurationError(
          f"experiment_id {o['experiment_id']!r} must match "
          f"{_ID_RE.pattern}",
          key="output.experiment_id")

  def __repr__(self):
    return (f"ExperimentConfig(id={self.experiment_id}, "
            f"epsilons={self.epsilons}, cell_resolution="
            f"{self.cell_resolution})")


def load_config(path: str) -> ExperimentConfig:
  """Reads and validates a YAML experiment config."""
  with open(path, "r", encoding="utf-8") as f:
    data = yaml_load(f.read())
  config = ExperimentConfig.from_dict(data,
                                      os.path.dirname(os.path.abspath(path)))
  logger.info("loaded %s from %s", config, path)
  return config
