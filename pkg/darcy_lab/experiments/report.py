"""Measurement records, their CSV form, the acceptance gates and the
markdown report.

Gate evaluation is a pure function of the records, so gates recomputed from
CSV files agree with the ones printed when the records were produced.
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence
import csv
import io
import logging
import math
import os

from ..discrete.regularity import *

__all__ = [
    "COLUMNS",
    "FAIL",
    "Gate",
    "NO_DATA",
    "PASS",
    "Record",
    "evaluate_gates",
    "format_csv",
    "read_records",
    "render_report",
    "write_csv",
    "write_report",
]

logger = logging.getLogger(__name__)

COLUMNS = ("experiment_id", "epsilon", "quantity", "r", "R", "delta", "q",
           "lhs", "rhs", "ratio", "slope", "r2", "flag")
_FLOAT_COLUMNS = ("epsilon", "r", "R", "delta", "q", "lhs", "rhs", "ratio",
                  "slope", "r2")

PASS = "pass"
FAIL = "fail"
NO_DATA = "no data"

# Flags that mark a legitimate value rather than a failed row.
_VALUE_FLAGS = ("", ZERO_OVER_ZERO, "not_asserted", "not_symmetric")

# Largest allowed ratio between fitted excess slopes at different eps.
SLOPE_SPREAD = 2.0


class Record:
  """One CSV row."""

  def __init__(self,
               experiment_id: str,
               quantity: str,
               epsilon: Optional[float] = None,
               r: Optional[float] = None,
               R: Optional[float] = None,
               delta: Optional[float] = None,
               q: Optional[float] = None,
               lhs: Optional[float] = None,
               rhs: Optional[float] = None,
               ratio: Optional[float] = None,
               slope: Optional[float] = None,
               r2: Optional[float] = None,
               flag: str = ""):
    self.experiment_id = experiment_id
    self.epsilon = epsilon
    self.quantity = quantity
    self.r = r
    self.R = R
    self.delta = delta
    self.q = q
    self.lhs = lhs
    self.rhs = rhs
    self.ratio = ratio
    self.slope = slope
    self.r2 = r2
    self.flag = flag

  @classmethod
  def of(cls, experiment_id: str, epsilon: Optional[float],
         m: Measurement) -> "Record":
    return cls(experiment_id,
               m.quantity,
               epsilon=epsilon,
               r=m.r,
               R=m.R,
               delta=m.delta,
               q=m.q,
               lhs=m.lhs,
               rhs=m.rhs,
               ratio=m.ratio,
               flag=m.flag)

  @classmethod
  def of_fit(cls, experiment_id: str, epsilon: Optional[float], quantity: str,
             fit: RateFit, **params) -> "Record":
    return cls(experiment_id,
               quantity,
               epsilon=epsilon,
               slope=fit.slope,
               r2=fit.r2,
               **params)

  @classmethod
  def failed(cls, experiment_id: str, epsilon: Optional[float], quantity: str,
             error: Exception, **params) -> "Record":
    message = " ".join(str(error).split())
    return cls(experiment_id,
               quantity,
               epsilon=epsilon,
               flag=f"{type(error).__name__}: {message}",
               **params)

  @property
  def ok(self) -> bool:
    return self.flag in _VALUE_FLAGS

  def as_row(self) -> List[str]:
    return [_format(getattr(self, c)) for c in COLUMNS]

  @classmethod
  def from_row(cls, row: Dict[str, str]) -> "Record":
    values = {}  # type: Dict[str, object]
    for c in COLUMNS:
      text = row.get(c, "")
      if c in _FLOAT_COLUMNS:
        values[c] = float(text) if text != "" else None
      else:
        values[c] = text
    return cls(**values)  # type: ignore

  def __repr__(self):
    return "Record(" + ", ".join(
        f"{c}={getattr(self, c)!r}"
        for c in COLUMNS
        if getattr(self, c) not in (None, "")) + ")"


def _format(value) -> str:
  if value is None:
    return ""
  if isinstance(value, float):
    return repr(value)
  return str(value)


def format_csv(records: Iterable[Record]) -> str:
  buffer = io.StringIO()
  writer = csv.writer(buffer, lineterminator="\n")
  writer.writerow(COLUMNS)
  for rec in records:
    writer.writerow(rec.as_row())
  return buffer.getvalue()


def write_csv(path: str, records: Iterable[Record]) -> str:
  """Writes the records; returns the exact text written."""
  text = format_csv(records)
  with open(path, "w", encoding="utf-8", newline="") as f:
    f.write(text)
  logger.info("wrote %s", path)
  return text


def read_records(path: str) -> List[Record]:
  with open(path, "r", encoding="utf-8", newline="") as f:
    reader = csv.DictReader(f)
    missing = set(COLUMNS) - set(reader.fieldnames or ())
    if missing:
      raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return [Record.from_row(row) for row in reader]


class Gate:
  """Verdict of one acceptance criterion."""

  def __init__(self, number: int, title: str, status: str, detail: str = ""):
    self.number = number
    self.title = title
    self.status = status
    self.detail = detail

  @property
  def failed(self) -> bool:
    return self.status == FAIL

  def __repr__(self):
    return f"Gate({self.number}, {self.title!r}, {self.status}, {self.detail!r})"


def _select(records: Sequence[Record], *quantities: str) -> List[Record]:
  return [r for r in records if r.quantity in quantities]


def _usable(records: Sequence[Record]) -> List[Record]:
  return [r for r in records if r.ok and r.lhs is not None]


def _verdict(number: int, title: str, rows: Sequence[Record],
             check: Callable[[Sequence[Record]], Optional[str]]) -> Gate:
  """`check` returns None on success or the reason for failure."""
  if not rows:
    return Gate(number, title, NO_DATA)
  errors = [r for r in rows if not r.ok]
  if errors:
    return Gate(number, title, FAIL,
                f"{len(errors)} rows failed: {errors[0].flag}")
  reason = check(rows)
  if reason is None:
    return Gate(number, title, PASS, f"{len(rows)} rows")
  return Gate(number, title, FAIL, reason)


def _all(predicate: Callable[[Record], bool],
         what: str) -> Callable[[Sequence[Record]], Optional[str]]:

  def check(rows: Sequence[Record]) -> Optional[str]:
    bad = [r for r in rows if not predicate(r)]
    if bad:
      return f"{len(bad)} of {len(rows)} rows {what}: {bad[0]!r}"
    return None

  return check


def _max_by_epsilon(rows: Sequence[Record],
                    key: Callable[[Record], object] = lambda r: None
                   ) -> Dict[object, Dict[float, float]]:
  """Per group, the largest ratio at each epsilon."""
  out = {}  # type: Dict[object, Dict[float, float]]
  for r in rows:
    by_eps = out.setdefault(key(r), {})
    eps = r.epsilon if r.epsilon is not None else 0.0
    by_eps[eps] = max(by_eps.get(eps, 0.0), r.ratio or 0.0)
  return out


def _spread_below(limit: float,
                  key: Callable[[Record], object] = lambda r: None
                 ) -> Callable[[Sequence[Record]], Optional[str]]:
  """Finite ratios whose per-epsilon maxima vary by less than `limit`x."""

  def check(rows: Sequence[Record]) -> Optional[str]:
    for group, by_eps in sorted(_max_by_epsilon(rows, key).items(),
                                key=lambda kv: str(kv[0])):
      values = list(by_eps.values())
      if not all(math.isfinite(v) for v in values):
        return f"unbounded ratio in group {group}"
      hi, lo = max(values), min(values)
      if hi == 0.0:
        continue
      if lo == 0.0 or hi / lo >= limit:
        return (f"group {group}: per-eps maxima {by_eps} vary by "
                f"{hi / lo if lo else math.inf:.3g}x")
    return None

  return check


def _decreasing(rows: Sequence[Record]) -> Optional[str]:
  """lhs strictly decreases as epsilon decreases, per quantity."""
  for quantity in sorted({r.quantity for r in rows}):
    series = sorted(((r.epsilon, r.lhs) for r in rows if r.quantity == quantity),
                    reverse=True)
    values = [v for _, v in series]
    if any(b >= a for a, b in zip(values, values[1:])):
      return f"{quantity} does not strictly decrease: {series}"
    if quantity == "compactness_u" and len(values) > 1 and values[0] > 0:
      if values[-1] / values[0] > 0.6:
        return (f"compactness_u drops only by {values[-1] / values[0]:.3g} "
                f"(need <= 0.6)")
  return None


def _permeability(rows: Sequence[Record]) -> Optional[str]:
  for r in rows:
    if r.quantity == "K_asymmetry" and r.ratio > 1e-12:
      return f"K asymmetry {r.ratio:.3g} > 1e-12"
    if r.quantity == "K_cholesky" and r.lhs != 1.0:
      return "K is not Cholesky-positive"
    if (r.quantity == "K_offdiagonal" and r.flag != "not_symmetric" and
        r.ratio > 1e-8):
      return f"off-diagonal K ratio {r.ratio:.3g} > 1e-8"
    if r.quantity == "K_refinement":
      # K_avg and K_energy agree discretely up to the cell solve tolerance, so
      # this rarely fails; K_convergence in the table shows the mesh error.
      # Both discrepancies at solver level pass without a decrease.
      solver_level = r.lhs <= 1e-6 and r.rhs <= 1e-6
      if not (r.ratio >= 1.5 or solver_level):
        return (f"K_avg/K_energy discrepancy decreases only by "
                f"{r.ratio:.3g}x (need 1.5x)")
  return None


def _fits(slope_min: float, strict: bool = False):

  def predicate(r: Record) -> bool:
    if r.slope is None or r.r2 is None:
      return False
    slope_ok = r.slope > slope_min if strict else r.slope >= slope_min
    return slope_ok and r.r2 >= 0.8

  return predicate


def _fit_rows(records: Sequence[Record], quantity: str) -> List[Record]:
  return [
      r for r in records
      if r.quantity == quantity and r.flag != "insufficient_points"
  ]


def _stable_slopes(limit: float):
  """Per quantity, fitted slopes whose largest and smallest across eps
  differ by less than `limit`x."""

  def check(rows: Sequence[Record]) -> Optional[str]:
    for quantity in sorted({r.quantity for r in rows}):
      slopes = {r.epsilon: r.slope for r in rows if r.quantity == quantity}
      hi, lo = max(slopes.values()), min(slopes.values())
      if hi >= limit * lo:
        return (f"{quantity} slopes {slopes} vary by {hi / lo:.3g}x "
                f"(need < {limit:g}x)")
    return None

  return check


def _excess_decay(records: Sequence[Record]) -> Gate:
  title = "excess decay exponent"
  rows = (_fit_rows(records, "excess_u_rate") +
          _fit_rows(records, "excess_grad_rate"))
  fits = _all(_fits(0.3), "fit a slope below 0.3 or R^2 below 0.8")
  stable = _stable_slopes(SLOPE_SPREAD)
  if all(r.ok for r in rows):
    for quantity in ("excess_u_rate", "excess_grad_rate"):
      count = len({r.epsilon for r in rows if r.quantity == quantity})
      if count < 2:
        return Gate(6, title, NO_DATA, f"{quantity} fitted at {count} eps")
  return _verdict(6, title, rows, lambda rs: fits(rs) or stable(rs))


def evaluate_gates(records: Sequence[Record]) -> List[Gate]:
  """All twelve acceptance gates over a record table."""
  gates = []
  gates.append(
      _verdict(
          1, "solver matches the dense oracle; discrete divergence",
          _select(records, "oracle_u", "oracle_p", "divergence"),
          _all(lambda r: r.ratio <= 1.0, "exceed their tolerance")))
  gates.append(
      _verdict(
          2, "permeability symmetric, positive, consistent",
          _select(records, "K_asymmetry", "K_cholesky", "K_discrepancy",
                  "K_offdiagonal", "K_refinement"), _permeability))
  gates.append(
      _verdict(3, "Liouville tiling exactness",
               _select(records, "liouville_u"),
               _all(lambda r: r.lhs <= 10.0 * r.rhs, "exceed 10x solver tol")))
  gates.append(
      _verdict(
          4, "pressure extension mean property",
          [
              r for r in _select(records, "mean_property")
              if r.flag != "not_asserted"
          ],
          _all(lambda r: r.lhs <= r.rhs, "deviate")))
  gates.append(
      _verdict(5, "Lipschitz ratio uniform in eps",
               _select(records, "lipschitz"), _spread_below(2.0)))
  gates.append(_excess_decay(records))
  gates.append(
      _verdict(7, "Caccioppoli and Poincare ratios uniform in eps",
               _select(records, "caccioppoli", "poincare"),
               _spread_below(2.0, key=lambda r: r.quantity)))
  gates.append(
      _verdict(8, "boundary layer exponent",
               _fit_rows(records, "boundary_layer_rate"),
               _all(_fits(0.0, strict=True), "fit sigma <= 0 or R^2 < 0.8")))
  gates.append(
      _verdict(9, "two-scale compactness errors decrease",
               _select(records, "compactness_u", "compactness_p"),
               _decreasing))
  gates.append(
      _verdict(10, "W^{1,q} ratios uniform in eps", _select(records, "wkp"),
               _spread_below(2.0, key=lambda r: r.q)))
  gates.append(
      _verdict(11, "excess minimizer beats the brute-force lattice",
               _select(records, "excess_witness"),
               _all(lambda r: r.lhs <= r.rhs * (1 + 1e-12) + 1e-300,
                    "lose to the lattice")))
  gates.append(
      _verdict(
          12, "byte-identical reruns",
          [
              r for r in _select(records, "determinism")
              if r.flag != "not_asserted"
          ],
          _all(lambda r: r.lhs == 1.0, "differ between runs")))
  return gates


def render_report(gates: Sequence[Gate],
                  tables: Dict[str, Sequence[Record]]) -> str:
  lines = ["# darcy_lab report", "", "## Acceptance gates", ""]
  lines.append("| gate | criterion | status | detail |")
  lines.append("| ---: | --- | --- | --- |")
  for g in gates:
    detail = g.detail.replace("|", "/")
    lines.append(f"| {g.number} | {g.title} | {g.status} | {detail} |")
  for name in sorted(tables):
    rows = tables[name]
    lines.extend(["", f"## {name}", ""])
    if not rows:
      lines.append("no data")
      continue
    by_quantity = {}  # type: Dict[str, List[Record]]
    for r in rows:
      by_quantity.setdefault(r.quantity, []).append(r)
    lines.append("| quantity | rows | max ratio | failed rows |")
    lines.append("| --- | ---: | ---: | ---: |")
    for quantity in sorted(by_quantity):
      group = by_quantity[quantity]
      ratios = [r.ratio for r in group if r.ratio is not None and r.ok]
      top = f"{max(ratios):.6g}" if ratios else "-"
      failed = sum(1 for r in group if not r.ok)
      lines.append(f"| {quantity} | {len(group)} | {top} | {failed} |")
  return "\n".join(lines) + "\n"


def write_report(directory: str) -> List[Gate]:
  """Re-reads every CSV in `directory`, rewrites report.md and returns the
  gates."""
  tables = {}  # type: Dict[str, List[Record]]
  if os.path.isdir(directory):
    for name in sorted(os.listdir(directory)):
      if name.endswith(".csv"):
        tables[name[:-4]] = read_records(os.path.join(directory, name))
  records = [r for name in sorted(tables) for r in tables[name]]
  gates = evaluate_gates(records)
  os.makedirs(directory, exist_ok=True)
  path = os.path.join(directory, "report.md")
  with open(path, "w", encoding="utf-8") as f:
    f.write(render_report(gates, tables))
  logger.info("wrote %s", path)
  return gates
