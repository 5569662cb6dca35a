"""Reads and writes flow states and cell solutions as field files.

A field file is a tagged YAML header document ended by a `...` line,
followed by one value per line (`%.17g`, so values round-trip exactly):

  --- !DarcyLabField
  kind: flow_state
  dim: 2
  ...
  0.0
  0.12500000000000003
  ...

Flow states list the face values of each velocity component (C order),
then the cell pressures, then the forcing faces. Cell solutions list, for
each j, the W_j face block followed by the pi_j cell block.
"""

from typing import Any, Dict, List, Optional, Tuple
import io
import logging

import numpy as np

from ..discrete.cell import *
from ..discrete.errors import *
from ..discrete.geometry import *
from ..discrete.grid import *
from ..discrete.stokes import *
from ..discrete.yaml_helper import *

__all__ = [
    "FieldHeader",
    "read_cell_solution",
    "read_flow_state",
    "write_cell_solution",
    "write_flow_state",
]

logger = logging.getLogger(__name__)

FLOW_STATE = "flow_state"
CELL_SOLUTION = "cell_solution"


class FieldHeader(YAMLObject):
  """Header document of a field file."""
  yaml_tag = "!DarcyLabField"

  def __init__(self, kind: str, grid: MacGrid, **extra):
    self.kind = kind
    self.grid = grid
    self.extra = extra

  def to_yaml_custom_dict(self):
    grid = self.grid
    d = dict(
        kind=self.kind,
        dim=grid.dim,
        n_per_unit=grid.n_per_unit,
        extent=grid.extent,
        topology=grid.topology,
    )
    d.update(self.extra)
    d["face_counts"] = list(grid.face_counts)
    d["cell_count"] = grid.num_cells
    return d


def _write(path: str, header: FieldHeader, blocks: List[np.ndarray]):
  with open(path, "w", encoding="utf-8") as f:
    f.write(yaml_dump(header, explicit_start=True, explicit_end=True))
    np.savetxt(f, np.concatenate([np.ravel(b) for b in blocks]), fmt="%.17g")
  logger.info("wrote %s field file %s", header.kind, path)


def _read(path: str, kind: str) -> Tuple[Dict[str, Any], np.ndarray]:
  with open(path, "r", encoding="utf-8") as f:
    text = f.read()
  head, sep, body = text.partition("\n...\n")
  if not sep:
    raise ValueError(f"{path}: missing the '...' line ending the header")
  header = yaml_load_tagged(head + "\n", FieldHeader)
  if header.get("kind") != kind:
    raise ValueError(f"{path}: expected a {kind} field file "
                     f"(got kind {header.get('kind')!r})")
  values = np.loadtxt(io.StringIO(body), dtype=float, ndmin=1)
  expected = _value_count(header)
  if values.size != expected:
    raise ValueError(f"{path}: expected {expected} values (got {values.size})")
  return header, values


def _value_count(header: Dict[str, Any]) -> int:
  faces = sum(header["face_counts"])
  cells = header["cell_count"]
  if header["kind"] == FLOW_STATE:
    return 2 * faces + cells
  return header["dim"] * (faces + cells)


def _grid_of(header: Dict[str, Any]) -> MacGrid:
  return build_mac_grid(header["dim"], header["n_per_unit"], header["extent"],
                        header["topology"])


def _split(grid: MacGrid, values: np.ndarray,
           offset: int) -> Tuple[FaceField, int]:
  field = grid.unpack_faces(values[offset:offset + grid.num_faces].copy())
  return field, offset + grid.num_faces


def _cells(grid: MacGrid, values: np.ndarray,
           offset: int) -> Tuple[np.ndarray, int]:
  block = values[offset:offset + grid.num_cells].reshape(grid.cell_shape)
  return block.copy(), offset + grid.num_cells


def write_flow_state(path: str, state: FlowState):
  header = FieldHeader(FLOW_STATE,
                       state.grid,
                       epsilon=float(state.epsilon),
                       mu=float(state.mu),
                       iterations=int(state.iterations))
  _write(path, header, list(state.u) + [state.p] + list(state.f))


def read_flow_state(path: str,
                    domain: PerforatedDomain,
                    inner: str = "direct") -> FlowState:
  """Reads a flow state back onto `domain`, which must match the header."""
  header, values = _read(path, FLOW_STATE)
  grid = _grid_of(header)
  if grid != domain.grid:
    raise ConfigurationError(f"{path} holds a field on {grid}, not on "
                             f"{domain.grid}",
                             key="resolution")
  if abs(header["epsilon"] - domain.epsilon) > 1e-12:
    raise ConfigurationError(f"{path} was written for eps = "
                             f"{header['epsilon']} (domain has "
                             f"{domain.epsilon})",
                             key="sweep.epsilons")
  system = assemble(domain, mu=header["mu"], inner=inner)
  u, offset = _split(grid, values, 0)
  p, offset = _cells(grid, values, offset)
  f, offset = _split(grid, values, offset)
  return FlowState(system, u, p, f, header.get("iterations", 0))


def write_cell_solution(path: str, cell: CellSolution):
  solid = [list(map(int, i)) for i in np.argwhere(cell.solid_unit)]
  header = FieldHeader(CELL_SOLUTION,
                       cell.grid,
                       resolution=int(cell.resolution),
                       unit_resolution=int(cell.solid_unit.shape[0]),
                       solid_voxels=solid,
                       K=[float(k) for k in cell.K_energy.ravel()],
                       K_avg=[float(k) for k in cell.K_avg.ravel()],
                       iterations=[int(i) for i in cell.iterations])
  blocks = []  # type: List[np.ndarray]
  for w, pi in zip(cell.W, cell.pi):
    blocks.extend(w)
    blocks.append(pi)
  _write(path, header, blocks)


def read_cell_solution(path: str) -> CellSolution:
  header, values = _read(path, CELL_SOLUTION)
  grid = _grid_of(header)
  dim = header["dim"]
  solid = np.zeros((header["unit_resolution"],) * dim, dtype=bool)
  for voxel in header["solid_voxels"]:
    solid[tuple(voxel)] = True
  W, pi = [], []
  offset = 0
  for _ in range(dim):
    w, offset = _split(grid, values, offset)
    p, offset = _cells(grid, values, offset)
    W.append(w)
    pi.append(p)
  cell = CellSolution(solid, header["resolution"], W, pi,
                      header.get("iterations"))
  stored = np.asarray(header["K"], dtype=float).reshape(dim, dim)
  if not np.array_equal(stored, cell.K_energy):
    logger.warning("%s: stored K differs from the recomputed K", path)
  return cell
